#include "bpad/encoding.hpp"

#include "bpad/error.hpp"
#include "json.hpp"

namespace bpad {

namespace {
const std::string kUnknownCategory = "<unknown>";
}

EncodingLayout::EncodingLayout(Alphabet activities, std::vector<std::string> attribute_names,
                               std::vector<Alphabet> attributes, std::size_t max_len, bool unknown_column)
    : activities_(std::move(activities)),
      attribute_names_(std::move(attribute_names)),
      attributes_(std::move(attributes)),
      max_len_(max_len),
      unknown_column_(unknown_column) {
  if (attribute_names_.size() != attributes_.size()) throw DataError("layout: attribute name/alphabet mismatch");
  if (max_len_ == 0) throw DataError("layout: max_len must be positive");
  const std::size_t extra = unknown_column_ ? 1 : 0;
  slot_widths_.push_back(activities_.size() + extra);
  for (const auto& a : attributes_) slot_widths_.push_back(a.size() + extra);
  for (auto w : slot_widths_) {
    slot_offsets_.push_back(event_width_);
    event_width_ += w;
  }
  if (event_width_ == 0) throw DataError("layout: empty alphabets");
}

std::optional<std::size_t> EncodingLayout::column(std::size_t event, std::size_t slot, std::string_view value) const {
  const Alphabet& alphabet = slot == 0 ? activities_ : attributes_.at(slot - 1);
  auto idx = alphabet.find(value);
  if (!idx) {
    if (!unknown_column_) return std::nullopt;
    idx = alphabet.size();
  }
  return slot_offset(event, slot) + *idx;
}

const std::string& EncodingLayout::category(std::size_t slot, std::size_t index) const {
  const Alphabet& alphabet = slot == 0 ? activities_ : attributes_.at(slot - 1);
  if (index == alphabet.size() && unknown_column_) return kUnknownCategory;
  return alphabet.at(index);
}

std::string EncodingLayout::slot_name(std::size_t slot) const {
  return slot == 0 ? std::string("activity") : attribute_names_.at(slot - 1);
}

bool EncodingLayout::operator==(const EncodingLayout& other) const {
  return activities_ == other.activities_ && attribute_names_ == other.attribute_names_ &&
         attributes_ == other.attributes_ && max_len_ == other.max_len_ && unknown_column_ == other.unknown_column_;
}

EncodingLayout build_layout(const EventLog& log, const LayoutOptions& options) {
  return EncodingLayout(log.activities(), log.attribute_names(), log.attribute_alphabets(),
                        std::max(log.max_trace_len(), options.max_len), options.unknown_column);
}

EncodedBatch encode(const EventLog& log, const EncodingLayout& layout) {
  if (log.attribute_names() != layout.attribute_names()) {
    throw DataError("log attributes do not match the encoding layout");
  }
  EncodedBatch batch;
  batch.data = Matrix::Zero(static_cast<Eigen::Index>(log.size()), static_cast<Eigen::Index>(layout.total_width()));
  batch.lengths.reserve(log.size());
  for (std::size_t t = 0; t < log.size(); ++t) {
    const auto& trace = log.trace(t);
    if (trace.size() > layout.max_len()) {
      throw DataError("trace '" + trace.case_id + "' has " + std::to_string(trace.size()) +
                      " events, encoder capacity is " + std::to_string(layout.max_len()));
    }
    for (std::size_t e = 0; e < trace.size(); ++e) {
      const auto& ev = trace.events[e];
      for (std::size_t s = 0; s < layout.slots_per_event(); ++s) {
        const std::string& value = s == 0 ? ev.activity : ev.attributes[s - 1];
        auto col = layout.column(e, s, value);
        if (!col) {
          throw DataError("trace '" + trace.case_id + "' event " + std::to_string(e) + ": " + layout.slot_name(s) +
                          " '" + value + "' is not in the training alphabet");
        }
        batch.data(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(*col)) = 1.0;
      }
    }
    batch.lengths.push_back(trace.size());
  }
  return batch;
}

DecodedSlot decode_slot(std::span<const double> row, const EncodingLayout& layout, std::size_t event,
                        std::size_t slot) {
  if (row.size() != layout.total_width()) throw DataError("decode_slot: row width mismatch");
  const std::size_t offset = layout.slot_offset(event, slot);
  std::size_t best = 0;
  for (std::size_t i = 1; i < layout.slot_width(slot); ++i) {
    if (row[offset + i] > row[offset + best]) best = i;
  }
  return DecodedSlot{layout.category(slot, best), row[offset + best]};
}

std::vector<Event> decode_trace(std::span<const double> row, const EncodingLayout& layout, std::size_t length) {
  std::vector<Event> events;
  for (std::size_t e = 0; e < length; ++e) {
    Event ev;
    ev.activity = decode_slot(row, layout, e, 0).category;
    for (std::size_t s = 1; s < layout.slots_per_event(); ++s) {
      ev.attributes.push_back(decode_slot(row, layout, e, s).category);
    }
    events.push_back(std::move(ev));
  }
  return events;
}

SlotErrors slot_errors(std::span<const double> input, std::span<const double> output, const EncodingLayout& layout) {
  if (input.size() != layout.total_width() || output.size() != layout.total_width()) {
    throw DataError("slot_errors: expected rows of width " + std::to_string(layout.total_width()));
  }
  SlotErrors out;
  out.slot_mse.resize(layout.slot_count());
  double total = 0.0;
  for (std::size_t e = 0; e < layout.max_len(); ++e) {
    for (std::size_t s = 0; s < layout.slots_per_event(); ++s) {
      const std::size_t off = layout.slot_offset(e, s);
      const std::size_t w = layout.slot_width(s);
      double sum = 0.0;
      for (std::size_t c = off; c < off + w; ++c) {
        const double d = input[c] - output[c];
        sum += d * d;
      }
      total += sum;
      out.slot_mse[layout.slot_index(e, s)] = sum / static_cast<double>(w);
    }
  }
  out.trace_mse = total / static_cast<double>(layout.total_width());
  return out;
}

std::string serialize_layout(const EncodingLayout& layout) {
  nlohmann::ordered_json j;
  j["activities"] = layout.activities().values();
  j["attribute_names"] = layout.attribute_names();
  auto attrs = nlohmann::ordered_json::array();
  for (std::size_t k = 0; k < layout.attribute_names().size(); ++k) {
    attrs.push_back(layout.attribute_alphabet(k).values());
  }
  j["attributes"] = std::move(attrs);
  j["max_len"] = layout.max_len();
  j["unknown_column"] = layout.unknown_column();
  return j.dump();
}

EncodingLayout parse_layout(const std::string& json_text) {
  try {
    auto j = nlohmann::ordered_json::parse(json_text);
    std::vector<Alphabet> attrs;
    for (const auto& a : j.at("attributes")) attrs.emplace_back(a.get<std::vector<std::string>>());
    return EncodingLayout(Alphabet(j.at("activities").get<std::vector<std::string>>()),
                          j.at("attribute_names").get<std::vector<std::string>>(), std::move(attrs),
                          j.at("max_len").get<std::size_t>(), j.at("unknown_column").get<bool>());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("layout: ") + e.what());
  }
}

}  // namespace bpad
