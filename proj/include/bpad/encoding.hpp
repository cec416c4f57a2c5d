#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bpad/eventlog.hpp"

namespace bpad {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

struct LayoutOptions {
  /// Encoder capacity; the layout uses max(log max length, this).
  std::size_t max_len = 0;
  /// Reserve one extra "unknown" column per alphabet for unseen categories.
  bool unknown_column = false;
};

/// Column layout of the one-hot encoding a1 || u1 || a2 || u2 || ... with
/// zero padding to max_len events.
class EncodingLayout {
 public:
  EncodingLayout(Alphabet activities, std::vector<std::string> attribute_names, std::vector<Alphabet> attributes,
                 std::size_t max_len, bool unknown_column);

  const Alphabet& activities() const { return activities_; }
  const std::vector<std::string>& attribute_names() const { return attribute_names_; }
  const Alphabet& attribute_alphabet(std::size_t k) const { return attributes_.at(k); }
  bool unknown_column() const { return unknown_column_; }

  std::size_t max_len() const { return max_len_; }
  /// Slots per event: the activity plus one per attribute.
  std::size_t slots_per_event() const { return 1 + attributes_.size(); }
  std::size_t slot_count() const { return max_len_ * slots_per_event(); }
  std::size_t event_width() const { return event_width_; }
  std::size_t total_width() const { return event_width_ * max_len_; }

  /// Categories in slot kind `slot` (0 = activity), including the unknown column.
  std::size_t slot_width(std::size_t slot) const { return slot_widths_.at(slot); }
  /// First column of (event, slot).
  std::size_t slot_offset(std::size_t event, std::size_t slot) const {
    return event * event_width_ + slot_offsets_.at(slot);
  }
  /// Flat slot index event * slots_per_event + slot.
  std::size_t slot_index(std::size_t event, std::size_t slot) const { return event * slots_per_event() + slot; }
  /// Column of a category, or nullopt if unseen and no unknown column exists.
  std::optional<std::size_t> column(std::size_t event, std::size_t slot, std::string_view value) const;
  /// Category label of a column within its slot ("<unknown>" for the extra column).
  const std::string& category(std::size_t slot, std::size_t index) const;
  std::string slot_name(std::size_t slot) const;

  bool operator==(const EncodingLayout& other) const;

 private:
  Alphabet activities_;
  std::vector<std::string> attribute_names_;
  std::vector<Alphabet> attributes_;
  std::size_t max_len_;
  bool unknown_column_;
  std::vector<std::size_t> slot_widths_;
  std::vector<std::size_t> slot_offsets_;
  std::size_t event_width_ = 0;
};

EncodingLayout build_layout(const EventLog& log, const LayoutOptions& options = {});

struct EncodedBatch {
  /// One row per trace, total_width columns.
  Matrix data;
  /// Real (unpadded) event count per row.
  std::vector<std::size_t> lengths;

  std::size_t rows() const { return static_cast<std::size_t>(data.rows()); }
};

/// Throws DataError naming the trace and position for out-of-alphabet values
/// (without an unknown column) or traces longer than max_len.
EncodedBatch encode(const EventLog& log, const EncodingLayout& layout);

struct DecodedSlot {
  std::string category;
  double value = 0.0;
};

/// Argmax category of one slot of an encoded (or reconstructed) row.
DecodedSlot decode_slot(std::span<const double> row, const EncodingLayout& layout, std::size_t event,
                        std::size_t slot);

/// Activities and attributes of the first `length` events of a row.
std::vector<Event> decode_trace(std::span<const double> row, const EncodingLayout& layout, std::size_t length);

struct SlotErrors {
  /// Mean squared error per flat slot index (including padded slots).
  std::vector<double> slot_mse;
  /// Mean squared error over the whole row.
  double trace_mse = 0.0;
};

SlotErrors slot_errors(std::span<const double> input, std::span<const double> output, const EncodingLayout& layout);

std::string serialize_layout(const EncodingLayout& layout);
EncodingLayout parse_layout(const std::string& json_text);

}  // namespace bpad
