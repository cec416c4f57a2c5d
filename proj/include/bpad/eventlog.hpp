#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace bpad {

/// Ordered set of categorical values; index order is first insertion.
class Alphabet {
 public:
  Alphabet() = default;
  explicit Alphabet(const std::vector<std::string>& values);

  /// Returns the index of `value`, inserting it at the end if absent.
  std::size_t add(const std::string& value);
  std::optional<std::size_t> find(std::string_view value) const;
  bool contains(std::string_view value) const { return find(value).has_value(); }

  const std::string& at(std::size_t index) const { return values_.at(index); }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }
  const std::vector<std::string>& values() const { return values_; }

  bool operator==(const Alphabet& other) const { return values_ == other.values_; }

 private:
  std::vector<std::string> values_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct Event {
  std::string activity;
  /// ISO-8601 instant, used for ordering only.
  std::optional<std::string> timestamp;
  /// Attribute values aligned with EventLog::attribute_names().
  std::vector<std::string> attributes;

  bool operator==(const Event&) const = default;
};

struct Trace {
  std::string case_id;
  std::vector<Event> events;

  std::size_t size() const { return events.size(); }
  bool operator==(const Trace&) const = default;
};

/// Immutable event log with a uniform attribute schema.
///
/// Alphabets are built in first-occurrence order over traces and events, so
/// the same traces always give the same alphabets.
class EventLog {
 public:
  /// Validates the traces and builds the alphabets. Throws DataError when the
  /// log is empty, a trace has no events, an activity label is empty, the
  /// attribute schema is not uniform, or a case id repeats.
  EventLog(std::vector<std::string> attribute_names, std::vector<Trace> traces);

  const std::vector<Trace>& traces() const { return traces_; }
  const Trace& trace(std::size_t i) const { return traces_.at(i); }
  std::size_t size() const { return traces_.size(); }

  const std::vector<std::string>& attribute_names() const { return attribute_names_; }
  std::optional<std::size_t> attribute_index(std::string_view name) const;

  const Alphabet& activities() const { return activities_; }
  const Alphabet& attribute_alphabet(std::size_t attr) const { return attribute_alphabets_.at(attr); }
  const std::vector<Alphabet>& attribute_alphabets() const { return attribute_alphabets_; }

  std::size_t max_trace_len() const { return max_trace_len_; }
  std::optional<std::size_t> find_case(std::string_view case_id) const;

  bool operator==(const EventLog& other) const {
    return attribute_names_ == other.attribute_names_ && traces_ == other.traces_;
  }

 private:
  std::vector<std::string> attribute_names_;
  std::vector<Trace> traces_;
  Alphabet activities_;
  std::vector<Alphabet> attribute_alphabets_;
  std::size_t max_trace_len_ = 0;
  std::unordered_map<std::string, std::size_t> case_index_;
};

enum class LogFormat { Jsonl, Csv, Xes };

LogFormat parse_log_format(std::string_view name);
std::string_view to_string(LogFormat format);

struct ReadOptions {
  /// Drop traces longer than this after ordering (XES/CSV imports of real logs).
  std::optional<std::size_t> max_trace_len;
};

/// Parses an event log. `source` names the input in error messages.
EventLog parse_log(std::string_view content, LogFormat format, std::string_view source = "<memory>",
                   const ReadOptions& options = {});
EventLog read_log(const std::filesystem::path& path, LogFormat format, const ReadOptions& options = {});

/// Serializes to JSONL or CSV. XES is import-only.
std::string serialize_log(const EventLog& log, LogFormat format);
void write_log(const EventLog& log, const std::filesystem::path& path, LogFormat format);

/// Milliseconds since the Unix epoch for "YYYY-MM-DD[T ]HH:MM:SS[.fff][Z|+HH:MM]".
std::optional<double> parse_timestamp(std::string_view text);

// ---------------------------------------------------------------------------
// Ground-truth labels
// ---------------------------------------------------------------------------

enum class AnomalyType { Skip, Switch, Rework, IncorrectUser, IncorrectLtd };

inline constexpr AnomalyType kAllAnomalyTypes[] = {AnomalyType::Skip, AnomalyType::Switch, AnomalyType::Rework,
                                                  AnomalyType::IncorrectUser, AnomalyType::IncorrectLtd};

std::string_view to_string(AnomalyType type);
AnomalyType parse_anomaly_type(std::string_view name);

/// One (event, attribute) slot. Slot 0 is the activity; slot 1 + k is attribute k.
struct SlotRef {
  std::size_t event = 0;
  std::size_t slot = 0;

  auto operator<=>(const SlotRef&) const = default;
};

struct AnomalyRecord {
  std::string case_id;
  AnomalyType type = AnomalyType::Skip;
  /// Affected event positions in the mutated trace.
  std::vector<std::size_t> positions;
  /// Slots labeled anomalous.
  std::vector<SlotRef> slots;

  bool operator==(const AnomalyRecord&) const = default;
};

struct TraceLabels {
  std::string case_id;
  std::optional<AnomalyRecord> anomaly;
  /// slots[event][slot], one row per real (unpadded) event.
  std::vector<std::vector<bool>> slots;

  bool is_anomalous() const { return anomaly.has_value(); }
  bool event_anomalous(std::size_t event) const;
  std::size_t size() const { return slots.size(); }

  bool operator==(const TraceLabels&) const = default;
};

struct LabelSet {
  /// 1 + number of attributes.
  std::size_t slots_per_event = 1;
  /// Positions at or beyond a trace's length, up to max_len, are padding.
  std::size_t max_len = 0;
  std::vector<TraceLabels> traces;

  std::size_t anomaly_count() const;
  bool operator==(const LabelSet&) const = default;
};

/// All-normal labels for a log.
LabelSet normal_labels(const EventLog& log, std::size_t max_len = 0);

/// Throws DataError when the trace/event/slot verdicts disagree, or when a
/// label row does not match the log (unknown case id, length mismatch).
void check_label_consistency(const LabelSet& labels);
void check_labels_match(const LabelSet& labels, const EventLog& log);

std::string serialize_labels(const LabelSet& labels);
LabelSet parse_labels(std::string_view content, std::string_view source = "<memory>");
void write_labels(const LabelSet& labels, const std::filesystem::path& path);
LabelSet read_labels(const std::filesystem::path& path);
/// Reads labels and checks every case id against `log`.
LabelSet read_labels(const std::filesystem::path& path, const EventLog& log);

}  // namespace bpad
