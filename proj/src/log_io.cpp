#include <algorithm>
#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <cctype>
#include <charconv>
#include <sstream>
#include <unordered_map>

#include "bpad/error.hpp"
#include "bpad/eventlog.hpp"
#include "bpad/util.hpp"
#include "json.hpp"

namespace bpad {

using ojson = nlohmann::ordered_json;

namespace {

// Howard Hinnant's days_from_civil.
long long days_from_civil(long long y, unsigned m, unsigned d) {
  y -= m <= 2;
  const long long era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m > 2 ? m - 3 : m + 9) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<long long>(doe) - 719468;
}

bool read_int(std::string_view s, std::size_t pos, std::size_t len, int& out) {
  if (pos + len > s.size()) return false;
  for (std::size_t i = pos; i < pos + len; ++i) {
    if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
  }
  std::from_chars(s.data() + pos, s.data() + pos + len, out);
  return true;
}

struct RawTrace {
  std::string case_id;
  std::vector<Event> events;
};

void order_events(std::vector<Event>& events) {
  bool all_present = std::all_of(events.begin(), events.end(), [](const Event& e) { return e.timestamp.has_value(); });
  if (!all_present) return;
  std::vector<std::optional<double>> keys;
  keys.reserve(events.size());
  bool all_parsed = true;
  for (const auto& e : events) {
    keys.push_back(parse_timestamp(*e.timestamp));
    all_parsed = all_parsed && keys.back().has_value();
  }
  std::vector<std::size_t> order(events.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  if (all_parsed) {
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return *keys[a] < *keys[b]; });
  } else {
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return *events[a].timestamp < *events[b].timestamp; });
  }
  std::vector<Event> sorted;
  sorted.reserve(events.size());
  for (auto i : order) sorted.push_back(std::move(events[i]));
  events = std::move(sorted);
}

EventLog finish(std::vector<std::string> attribute_names, std::vector<RawTrace> raw, const ReadOptions& options) {
  std::vector<Trace> traces;
  traces.reserve(raw.size());
  for (auto& r : raw) {
    order_events(r.events);
    if (options.max_trace_len && r.events.size() > *options.max_trace_len) continue;
    traces.push_back(Trace{std::move(r.case_id), std::move(r.events)});
  }
  if (traces.empty()) throw DataError("event log is empty");
  return EventLog(std::move(attribute_names), std::move(traces));
}

// ---------------------------------------------------------------------------
// JSONL

EventLog parse_jsonl(std::string_view content, std::string_view source, const ReadOptions& options) {
  std::vector<std::string> names;
  bool schema_known = false;
  std::vector<RawTrace> raw;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= content.size()) {
    auto end = content.find('\n', start);
    if (end == std::string_view::npos) end = content.size();
    std::string_view line = content.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) {
      if (end == content.size()) break;
      continue;
    }
    const std::string pos = "line " + std::to_string(line_no);
    ojson j;
    try {
      j = ojson::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string(source), pos, e.what());
    }
    try {
      RawTrace rt;
      if (!j.is_object() || !j.contains("case_id") || !j.contains("events")) {
        throw ParseError(std::string(source), pos, "expected object with case_id and events");
      }
      rt.case_id = j.at("case_id").get<std::string>();
      for (const auto& je : j.at("events")) {
        Event ev;
        ev.activity = je.at("activity").get<std::string>();
        if (je.contains("timestamp") && !je.at("timestamp").is_null()) {
          ev.timestamp = je.at("timestamp").get<std::string>();
        }
        const ojson attrs = je.contains("attrs") ? je.at("attrs") : ojson::object();
        if (!attrs.is_object()) throw ParseError(std::string(source), pos, "attrs must be an object");
        if (!schema_known) {
          for (const auto& [k, v] : attrs.items()) names.push_back(k);
          schema_known = true;
        }
        if (attrs.size() != names.size()) {
          throw ParseError(std::string(source), pos, "attribute keys differ from the log schema");
        }
        for (const auto& n : names) {
          if (!attrs.contains(n)) throw ParseError(std::string(source), pos, "missing attribute '" + n + "'");
          ev.attributes.push_back(attrs.at(n).get<std::string>());
        }
        rt.events.push_back(std::move(ev));
      }
      raw.push_back(std::move(rt));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string(source), pos, e.what());
    }
    if (end == content.size()) break;
  }
  return finish(std::move(names), std::move(raw), options);
}

std::string serialize_jsonl(const EventLog& log) {
  std::string out;
  for (const auto& t : log.traces()) {
    ojson j;
    j["case_id"] = t.case_id;
    ojson events = ojson::array();
    for (const auto& e : t.events) {
      ojson je;
      je["activity"] = e.activity;
      je["timestamp"] = e.timestamp ? ojson(*e.timestamp) : ojson(nullptr);
      ojson attrs = ojson::object();
      for (std::size_t a = 0; a < e.attributes.size(); ++a) attrs[log.attribute_names()[a]] = e.attributes[a];
      je["attrs"] = std::move(attrs);
      events.push_back(std::move(je));
    }
    j["events"] = std::move(events);
    out += j.dump();
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV (RFC 4180 quoting)

std::vector<std::vector<std::string>> parse_csv_rows(std::string_view content, std::string_view source,
                                                     std::vector<std::size_t>& row_lines) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  std::size_t line = 1;
  std::size_t row_line = 1;
  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    if (!(row.size() == 1 && row[0].empty())) {
      rows.push_back(std::move(row));
      row_lines.push_back(row_line);
    }
    row.clear();
  };
  for (std::size_t i = 0; i < content.size(); ++i) {
    char c = content[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < content.size() && content[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        if (field_started || !field.empty()) {
          throw ParseError(std::string(source), "line " + std::to_string(line), "stray quote in unquoted field");
        }
        in_quotes = true;
        field_started = true;
        break;
      case ',':
        end_field();
        break;
      case '\r':
        break;
      case '\n':
        end_row();
        ++line;
        row_line = line;
        break;
      default:
        field += c;
        field_started = true;
    }
  }
  if (in_quotes) throw ParseError(std::string(source), "line " + std::to_string(line), "unterminated quoted field");
  if (field_started || !row.empty() || !field.empty()) end_row();
  return rows;
}

EventLog parse_csv(std::string_view content, std::string_view source, const ReadOptions& options) {
  std::vector<std::size_t> row_lines;
  auto rows = parse_csv_rows(content, source, row_lines);
  if (rows.empty()) throw DataError(std::string(source) + ": event log is empty");
  const auto& header = rows[0];
  if (header.size() < 3 || header[0] != "case_id" || header[1] != "timestamp" || header[2] != "activity") {
    throw ParseError(std::string(source), "line 1", "header must start with case_id,timestamp,activity");
  }
  std::vector<std::string> names(header.begin() + 3, header.end());
  std::vector<RawTrace> raw;
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != header.size()) {
      throw ParseError(std::string(source), "line " + std::to_string(row_lines[r]),
                       "expected " + std::to_string(header.size()) + " fields, got " + std::to_string(row.size()));
    }
    auto [it, inserted] = index.try_emplace(row[0], raw.size());
    if (inserted) raw.push_back(RawTrace{row[0], {}});
    Event ev;
    ev.activity = row[2];
    if (!row[1].empty()) ev.timestamp = row[1];
    ev.attributes.assign(row.begin() + 3, row.end());
    raw[it->second].events.push_back(std::move(ev));
  }
  return finish(std::move(names), std::move(raw), options);
}

void append_csv_field(std::string& out, std::string_view value) {
  if (value.find_first_of(",\"\r\n") == std::string_view::npos) {
    out += value;
    return;
  }
  out += '"';
  for (char c : value) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
}

std::string serialize_csv(const EventLog& log) {
  std::string out = "case_id,timestamp,activity";
  for (const auto& n : log.attribute_names()) {
    out += ',';
    append_csv_field(out, n);
  }
  out += '\n';
  for (const auto& t : log.traces()) {
    for (const auto& e : t.events) {
      append_csv_field(out, t.case_id);
      out += ',';
      if (e.timestamp) append_csv_field(out, *e.timestamp);
      out += ',';
      append_csv_field(out, e.activity);
      for (const auto& a : e.attributes) {
        out += ',';
        append_csv_field(out, a);
      }
      out += '\n';
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// XES subset: trace/event concept:name and event time:timestamp

std::optional<std::string> xes_attribute(const boost::property_tree::ptree& node, std::string_view tag,
                                         std::string_view key) {
  for (const auto& [name, child] : node) {
    if (name != tag) continue;
    auto k = child.get_optional<std::string>("<xmlattr>.key");
    if (k && *k == key) {
      auto v = child.get_optional<std::string>("<xmlattr>.value");
      if (v) return *v;
    }
  }
  return std::nullopt;
}

EventLog parse_xes(std::string_view content, std::string_view source, const ReadOptions& options) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in{std::string(content)};
  try {
    pt::read_xml(in, tree);
  } catch (const pt::xml_parser_error& e) {
    throw ParseError(std::string(source), "line " + std::to_string(e.line()), e.message());
  }
  auto log_node = tree.get_child_optional("log");
  if (!log_node) throw ParseError(std::string(source), "/", "missing <log> root element");
  std::vector<RawTrace> raw;
  std::size_t trace_no = 0;
  for (const auto& [name, trace_node] : *log_node) {
    if (name != "trace") continue;
    ++trace_no;
    const std::string tpos = "/log/trace[" + std::to_string(trace_no) + "]";
    auto case_id = xes_attribute(trace_node, "string", "concept:name");
    if (!case_id) throw ParseError(std::string(source), tpos, "trace without concept:name");
    RawTrace rt{*case_id, {}};
    std::size_t event_no = 0;
    for (const auto& [ename, event_node] : trace_node) {
      if (ename != "event") continue;
      ++event_no;
      Event ev;
      auto activity = xes_attribute(event_node, "string", "concept:name");
      if (!activity) {
        throw ParseError(std::string(source), tpos + "/event[" + std::to_string(event_no) + "]",
                         "event without concept:name");
      }
      ev.activity = *activity;
      ev.timestamp = xes_attribute(event_node, "date", "time:timestamp");
      rt.events.push_back(std::move(ev));
    }
    if (rt.events.empty()) continue;
    raw.push_back(std::move(rt));
  }
  return finish({}, std::move(raw), options);
}

}  // namespace

std::optional<double> parse_timestamp(std::string_view s) {
  int y, mo, d, h, mi, sec;
  if (!read_int(s, 0, 4, y) || s.size() < 19 || s[4] != '-' || !read_int(s, 5, 2, mo) || s[7] != '-' ||
      !read_int(s, 8, 2, d) || (s[10] != 'T' && s[10] != ' ') || !read_int(s, 11, 2, h) || s[13] != ':' ||
      !read_int(s, 14, 2, mi) || s[16] != ':' || !read_int(s, 17, 2, sec)) {
    return std::nullopt;
  }
  if (mo < 1 || mo > 12 || d < 1 || d > 31 || h > 23 || mi > 59 || sec > 60) return std::nullopt;
  std::size_t pos = 19;
  double millis = 0.0;
  if (pos < s.size() && s[pos] == '.') {
    ++pos;
    double scale = 100.0;
    std::size_t digits = 0;
    while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) {
      millis += (s[pos] - '0') * scale;
      scale /= 10.0;
      ++pos;
      ++digits;
    }
    if (digits == 0) return std::nullopt;
  }
  long long offset_minutes = 0;
  if (pos < s.size()) {
    if (s[pos] == 'Z') {
      ++pos;
    } else if (s[pos] == '+' || s[pos] == '-') {
      int oh, om;
      int sign = s[pos] == '-' ? -1 : 1;
      if (!read_int(s, pos + 1, 2, oh)) return std::nullopt;
      std::size_t mpos = pos + 3;
      if (mpos < s.size() && s[mpos] == ':') ++mpos;
      if (!read_int(s, mpos, 2, om)) return std::nullopt;
      offset_minutes = sign * (oh * 60 + om);
      pos = mpos + 2;
    }
  }
  if (pos != s.size()) return std::nullopt;
  long long days = days_from_civil(y, static_cast<unsigned>(mo), static_cast<unsigned>(d));
  long long seconds = days * 86400 + h * 3600 + mi * 60 + sec - offset_minutes * 60;
  return static_cast<double>(seconds) * 1000.0 + millis;
}

EventLog parse_log(std::string_view content, LogFormat format, std::string_view source, const ReadOptions& options) {
  switch (format) {
    case LogFormat::Jsonl: return parse_jsonl(content, source, options);
    case LogFormat::Csv: return parse_csv(content, source, options);
    case LogFormat::Xes: return parse_xes(content, source, options);
  }
  throw ConfigError("unsupported format");
}

EventLog read_log(const std::filesystem::path& path, LogFormat format, const ReadOptions& options) {
  return parse_log(read_file(path), format, path.string(), options);
}

std::string serialize_log(const EventLog& log, LogFormat format) {
  switch (format) {
    case LogFormat::Jsonl: return serialize_jsonl(log);
    case LogFormat::Csv: return serialize_csv(log);
    case LogFormat::Xes: throw ConfigError("XES is supported for import only");
  }
  throw ConfigError("unsupported format");
}

void write_log(const EventLog& log, const std::filesystem::path& path, LogFormat format) {
  atomic_write(path, serialize_log(log, format));
}

// ---------------------------------------------------------------------------
// Label sidecar

std::string serialize_labels(const LabelSet& labels) {
  std::string out;
  for (const auto& t : labels.traces) {
    ojson j;
    j["case_id"] = t.case_id;
    j["trace"] = t.anomaly ? std::string(to_string(t.anomaly->type)) : std::string("normal");
    ojson events = ojson::array();
    ojson attrs = ojson::array();
    for (std::size_t e = 0; e < labels.max_len; ++e) {
      if (e < t.slots.size()) {
        events.push_back(t.event_anomalous(e) ? "anomaly" : "normal");
        ojson row = ojson::array();
        for (bool b : t.slots[e]) row.push_back(b ? "anomaly" : "normal");
        attrs.push_back(std::move(row));
      } else {
        events.push_back("pad");
        attrs.push_back(ojson(std::vector<std::string>(labels.slots_per_event, "pad")));
      }
    }
    j["events"] = std::move(events);
    j["attrs"] = std::move(attrs);
    if (t.anomaly) {
      ojson rec;
      rec["positions"] = t.anomaly->positions;
      ojson slots = ojson::array();
      for (const auto& s : t.anomaly->slots) slots.push_back({s.event, s.slot});
      rec["slots"] = std::move(slots);
      j["record"] = std::move(rec);
    }
    out += j.dump();
    out += '\n';
  }
  return out;
}

LabelSet parse_labels(std::string_view content, std::string_view source) {
  LabelSet labels;
  bool first = true;
  std::size_t line_no = 0;
  std::istringstream in{std::string(content)};
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string pos = "line " + std::to_string(line_no);
    try {
      auto j = ojson::parse(line);
      TraceLabels t;
      t.case_id = j.at("case_id").get<std::string>();
      const auto& events = j.at("events");
      const auto& attrs = j.at("attrs");
      if (events.size() != attrs.size()) throw ParseError(std::string(source), pos, "events/attrs length mismatch");
      if (first) {
        labels.max_len = events.size();
        labels.slots_per_event = attrs.empty() ? 1 : attrs.at(0).size();
        first = false;
      } else if (events.size() != labels.max_len) {
        throw ParseError(std::string(source), pos, "inconsistent padded length");
      }
      bool in_pad = false;
      for (std::size_t e = 0; e < events.size(); ++e) {
        const auto ev = events[e].get<std::string>();
        const auto& row = attrs[e];
        if (row.size() != labels.slots_per_event) throw ParseError(std::string(source), pos, "bad attrs row width");
        if (ev == "pad") {
          in_pad = true;
          for (const auto& s : row) {
            if (s.get<std::string>() != "pad") throw ParseError(std::string(source), pos, "pad event with verdicts");
          }
          continue;
        }
        if (in_pad) throw ParseError(std::string(source), pos, "event verdict after padding");
        std::vector<bool> slots;
        for (const auto& s : row) {
          const auto v = s.get<std::string>();
          if (v != "normal" && v != "anomaly") throw ParseError(std::string(source), pos, "bad verdict '" + v + "'");
          slots.push_back(v == "anomaly");
        }
        const bool event_flag = std::find(slots.begin(), slots.end(), true) != slots.end();
        if (ev != (event_flag ? "anomaly" : "normal")) {
          throw ParseError(std::string(source), pos, "event verdict disagrees with attribute verdicts");
        }
        t.slots.push_back(std::move(slots));
      }
      const auto trace = j.at("trace").get<std::string>();
      if (trace != "normal") {
        AnomalyRecord rec;
        rec.case_id = t.case_id;
        rec.type = parse_anomaly_type(trace);
        if (j.contains("record")) {
          rec.positions = j.at("record").at("positions").get<std::vector<std::size_t>>();
          for (const auto& s : j.at("record").at("slots")) {
            rec.slots.push_back(SlotRef{s.at(0).get<std::size_t>(), s.at(1).get<std::size_t>()});
          }
        }
        t.anomaly = std::move(rec);
      }
      labels.traces.push_back(std::move(t));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string(source), pos, e.what());
    } catch (const DataError& e) {
      if (dynamic_cast<const ParseError*>(&e)) throw;
      throw ParseError(std::string(source), pos, e.what());
    }
  }
  check_label_consistency(labels);
  return labels;
}

void write_labels(const LabelSet& labels, const std::filesystem::path& path) {
  atomic_write(path, serialize_labels(labels));
}

LabelSet read_labels(const std::filesystem::path& path) { return parse_labels(read_file(path), path.string()); }

LabelSet read_labels(const std::filesystem::path& path, const EventLog& log) {
  auto labels = read_labels(path);
  check_labels_match(labels, log);
  return labels;
}

}  // namespace bpad
