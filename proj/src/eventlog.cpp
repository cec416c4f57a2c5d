#include "bpad/eventlog.hpp"

#include <string>

#include "bpad/error.hpp"

namespace bpad {

Alphabet::Alphabet(const std::vector<std::string>& values) {
  for (const auto& v : values) {
    if (contains(v)) throw DataError("duplicate alphabet value '" + v + "'");
    add(v);
  }
}

std::size_t Alphabet::add(const std::string& value) {
  auto [it, inserted] = index_.try_emplace(value, values_.size());
  if (inserted) values_.push_back(value);
  return it->second;
}

std::optional<std::size_t> Alphabet::find(std::string_view value) const {
  auto it = index_.find(std::string(value));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

EventLog::EventLog(std::vector<std::string> attribute_names, std::vector<Trace> traces)
    : attribute_names_(std::move(attribute_names)), traces_(std::move(traces)) {
  if (traces_.empty()) throw DataError("event log is empty");
  {
    Alphabet names;
    for (const auto& n : attribute_names_) {
      if (n.empty()) throw DataError("empty attribute name");
      if (names.contains(n)) throw DataError("duplicate attribute name '" + n + "'");
      names.add(n);
    }
  }
  attribute_alphabets_.resize(attribute_names_.size());
  for (std::size_t t = 0; t < traces_.size(); ++t) {
    const auto& trace = traces_[t];
    if (!case_index_.try_emplace(trace.case_id, t).second) {
      throw DataError("duplicate case id '" + trace.case_id + "'");
    }
    if (trace.events.empty()) throw DataError("trace '" + trace.case_id + "' has no events");
    for (std::size_t e = 0; e < trace.events.size(); ++e) {
      const auto& ev = trace.events[e];
      if (ev.activity.empty()) {
        throw DataError("trace '" + trace.case_id + "' event " + std::to_string(e) + ": empty activity label");
      }
      if (ev.attributes.size() != attribute_names_.size()) {
        throw DataError("trace '" + trace.case_id + "' event " + std::to_string(e) + ": expected " +
                        std::to_string(attribute_names_.size()) + " attributes, got " +
                        std::to_string(ev.attributes.size()));
      }
      activities_.add(ev.activity);
      for (std::size_t a = 0; a < ev.attributes.size(); ++a) attribute_alphabets_[a].add(ev.attributes[a]);
    }
    max_trace_len_ = std::max(max_trace_len_, trace.events.size());
  }
}

std::optional<std::size_t> EventLog::attribute_index(std::string_view name) const {
  for (std::size_t i = 0; i < attribute_names_.size(); ++i) {
    if (attribute_names_[i] == name) return i;
  }
  return std::nullopt;
}

std::optional<std::size_t> EventLog::find_case(std::string_view case_id) const {
  auto it = case_index_.find(std::string(case_id));
  if (it == case_index_.end()) return std::nullopt;
  return it->second;
}

LogFormat parse_log_format(std::string_view name) {
  if (name == "jsonl") return LogFormat::Jsonl;
  if (name == "csv") return LogFormat::Csv;
  if (name == "xes") return LogFormat::Xes;
  throw ConfigError("unknown log format '" + std::string(name) + "' (expected jsonl|csv|xes)");
}

std::string_view to_string(LogFormat format) {
  switch (format) {
    case LogFormat::Jsonl: return "jsonl";
    case LogFormat::Csv: return "csv";
    case LogFormat::Xes: return "xes";
  }
  return "?";
}

std::string_view to_string(AnomalyType type) {
  switch (type) {
    case AnomalyType::Skip: return "skip";
    case AnomalyType::Switch: return "switch";
    case AnomalyType::Rework: return "rework";
    case AnomalyType::IncorrectUser: return "incorrect_user";
    case AnomalyType::IncorrectLtd: return "incorrect_ltd";
  }
  return "?";
}

AnomalyType parse_anomaly_type(std::string_view name) {
  for (auto t : kAllAnomalyTypes) {
    if (to_string(t) == name) return t;
  }
  throw DataError("unknown anomaly type '" + std::string(name) + "'");
}

bool TraceLabels::event_anomalous(std::size_t event) const {
  for (bool b : slots.at(event)) {
    if (b) return true;
  }
  return false;
}

std::size_t LabelSet::anomaly_count() const {
  std::size_t n = 0;
  for (const auto& t : traces) n += t.is_anomalous() ? 1 : 0;
  return n;
}

LabelSet normal_labels(const EventLog& log, std::size_t max_len) {
  LabelSet labels;
  labels.slots_per_event = 1 + log.attribute_names().size();
  labels.max_len = std::max(max_len, log.max_trace_len());
  labels.traces.reserve(log.size());
  for (const auto& trace : log.traces()) {
    TraceLabels tl;
    tl.case_id = trace.case_id;
    tl.slots.assign(trace.size(), std::vector<bool>(labels.slots_per_event, false));
    labels.traces.push_back(std::move(tl));
  }
  return labels;
}

void check_label_consistency(const LabelSet& labels) {
  for (const auto& t : labels.traces) {
    if (t.slots.size() > labels.max_len) {
      throw DataError("labels for '" + t.case_id + "' exceed max_len " + std::to_string(labels.max_len));
    }
    bool any = false;
    for (const auto& row : t.slots) {
      if (row.size() != labels.slots_per_event) {
        throw DataError("labels for '" + t.case_id + "' have a row of the wrong width");
      }
      for (bool b : row) any = any || b;
    }
    if (any != t.is_anomalous()) {
      throw DataError("labels for '" + t.case_id + "': trace verdict disagrees with attribute verdicts");
    }
    if (t.anomaly) {
      if (t.anomaly->case_id != t.case_id) throw DataError("anomaly record case id mismatch for '" + t.case_id + "'");
      for (const auto& s : t.anomaly->slots) {
        if (s.event >= t.slots.size() || s.slot >= labels.slots_per_event || !t.slots[s.event][s.slot]) {
          throw DataError("anomaly record for '" + t.case_id + "' references an unlabeled slot");
        }
      }
      for (auto p : t.anomaly->positions) {
        if (p >= t.slots.size()) throw DataError("anomaly record for '" + t.case_id + "' has an invalid position");
      }
    }
  }
}

void check_labels_match(const LabelSet& labels, const EventLog& log) {
  if (labels.slots_per_event != 1 + log.attribute_names().size()) {
    throw DataError("labels have " + std::to_string(labels.slots_per_event) + " slots per event, log has " +
                    std::to_string(1 + log.attribute_names().size()));
  }
  for (const auto& t : labels.traces) {
    auto idx = log.find_case(t.case_id);
    if (!idx) throw DataError("labels reference unknown case id '" + t.case_id + "'");
    if (log.trace(*idx).size() != t.slots.size()) {
      throw DataError("labels for '" + t.case_id + "' cover " + std::to_string(t.slots.size()) +
                      " events, trace has " + std::to_string(log.trace(*idx).size()));
    }
  }
  if (labels.traces.size() != log.size()) {
    throw DataError("labels cover " + std::to_string(labels.traces.size()) + " traces, log has " +
                    std::to_string(log.size()));
  }
}

}  // namespace bpad
