#include "bpad/detectors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "bpad/error.hpp"
#include "bpad/util.hpp"
#include "json.hpp"

namespace bpad {

namespace {

using ojson = nlohmann::ordered_json;

std::vector<std::string> slot_names_of(const std::vector<std::string>& attribute_names) {
  std::vector<std::string> names = {"activity"};
  names.insert(names.end(), attribute_names.begin(), attribute_names.end());
  return names;
}

// Means over traces, real events and real slots.
ResolutionMeans report_means(const std::vector<TraceScore>& traces) {
  std::vector<double> t, e, a;
  for (const auto& ts : traces) {
    t.push_back(ts.score);
    e.insert(e.end(), ts.events.begin(), ts.events.end());
    for (const auto& row : ts.slots) a.insert(a.end(), row.begin(), row.end());
  }
  ResolutionMeans m;
  m[Resolution::Trace] = mean_error(t);
  m[Resolution::Event] = mean_error(e);
  m[Resolution::Attribute] = mean_error(a);
  return m;
}

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::size_t ScoreReport::anomaly_count() const {
  return static_cast<std::size_t>(
      std::count_if(traces.begin(), traces.end(), [](const TraceScore& t) { return t.anomalous; }));
}

ScoreReport apply_threshold(ScoreReport report, const Threshold& threshold) {
  report.threshold = threshold;
  for (auto& t : report.traces) {
    t.anomalous = threshold.is_anomalous(Resolution::Trace, t.score);
    t.event_verdicts.resize(t.events.size());
    t.slot_verdicts.resize(t.slots.size());
    for (std::size_t e = 0; e < t.events.size(); ++e) {
      t.event_verdicts[e] = threshold.is_anomalous(Resolution::Event, t.events[e]);
      t.slot_verdicts[e].resize(t.slots[e].size());
      for (std::size_t s = 0; s < t.slots[e].size(); ++s) {
        t.slot_verdicts[e][s] = threshold.is_anomalous(Resolution::Attribute, t.slots[e][s]);
      }
    }
  }
  return report;
}

// ---------------------------------------------------------------------------

ScoreReport dae_score(const TrainedNetwork& model, const EventLog& log, double alpha) {
  const auto batch = encode(log, model.layout);
  const auto errors = reconstruction_errors(model.net, batch, model.layout);
  ScoreReport report;
  report.detector = "dae";
  report.slot_names = slot_names_of(model.layout.attribute_names());
  report.max_len = model.layout.max_len();
  report.traces.reserve(log.size());
  for (std::size_t t = 0; t < log.size(); ++t) {
    TraceScore ts;
    ts.case_id = log.trace(t).case_id;
    ts.score = errors[t].trace;
    ts.events = errors[t].events;
    ts.slots = errors[t].slots;
    report.traces.push_back(std::move(ts));
  }
  return apply_threshold(std::move(report), Threshold{alpha, model.train_errors});
}

// ---------------------------------------------------------------------------

std::uint64_t WindowModel::count(const Window& w) const {
  auto it = counts.find(w);
  return it == counts.end() ? 0 : it->second;
}

std::vector<std::pair<Window, std::size_t>> trace_windows(const Trace& trace, std::size_t k, WindowKind kind) {
  if (k < 2) throw ConfigError("window size k must be at least 2");
  auto token = [&](const Event& e) {
    EventToken tok;
    tok.values.push_back(e.activity);
    if (kind == WindowKind::ActivityAttributes) tok.values.insert(tok.values.end(), e.attributes.begin(), e.attributes.end());
    return tok;
  };
  std::vector<std::pair<Window, std::size_t>> out;
  const std::size_t n = trace.size();
  if (n < k) {
    Window w;
    for (const auto& e : trace.events) w.push_back(token(e));
    w.push_back(EventToken{true, {}});
    out.emplace_back(std::move(w), n - 1);
    return out;
  }
  for (std::size_t start = 0; start + k <= n; ++start) {
    Window w;
    for (std::size_t i = start; i < start + k; ++i) w.push_back(token(trace.events[i]));
    out.emplace_back(std::move(w), start + k - 1);
  }
  return out;
}

double window_score(const WindowModel& model, const Window& window) {
  const double c = std::max(static_cast<double>(model.count(window)), kUnseenWindowCount);
  return -std::log(c / static_cast<double>(model.total));
}

namespace {

ScoreReport tstide_scores(const WindowModel& model, const EventLog& log) {
  ScoreReport report;
  report.detector = model.kind == WindowKind::Activity ? "tstide" : "tstide+";
  report.slot_names = slot_names_of(log.attribute_names());
  report.max_len = log.max_trace_len();
  const std::size_t spe = report.slots_per_event();
  for (const auto& trace : log.traces()) {
    TraceScore ts;
    ts.case_id = trace.case_id;
    ts.events.assign(trace.size(), 0.0);
    ts.slots.assign(trace.size(), std::vector<double>(spe, 0.0));
    for (const auto& [window, last] : trace_windows(trace, model.k, model.kind)) {
      const double s = window_score(model, window);
      ts.score = std::max(ts.score, s);
      ts.events[last] = std::max(ts.events[last], s);
      const std::size_t scored_slots = model.kind == WindowKind::Activity ? 1 : spe;
      for (std::size_t slot = 0; slot < scored_slots; ++slot) {
        ts.slots[last][slot] = std::max(ts.slots[last][slot], s);
      }
    }
    report.traces.push_back(std::move(ts));
  }
  return report;
}

}  // namespace

WindowModel tstide_fit(const EventLog& log, std::size_t k, WindowKind kind) {
  WindowModel model;
  model.k = k;
  model.kind = kind;
  for (const auto& trace : log.traces()) {
    for (auto& [window, last] : trace_windows(trace, k, kind)) {
      ++model.counts[window];
      ++model.total;
    }
  }
  model.train_errors = report_means(tstide_scores(model, log).traces);
  return model;
}

ScoreReport tstide_score(const WindowModel& model, const EventLog& log, double alpha) {
  if (model.total == 0) throw ConfigError("t-STIDE model is not fitted");
  return apply_threshold(tstide_scores(model, log), Threshold{alpha, model.train_errors});
}

std::string serialize_window_model(const WindowModel& model) {
  ojson j;
  j["format"] = "bpad-tstide";
  j["version"] = 1;
  j["k"] = model.k;
  j["kind"] = model.kind == WindowKind::Activity ? "activity" : "activity+attributes";
  j["total"] = model.total;
  j["train_errors"] = {{"trace", model.train_errors[Resolution::Trace]},
                       {"event", model.train_errors[Resolution::Event]},
                       {"attribute", model.train_errors[Resolution::Attribute]}};
  ojson windows = ojson::array();
  for (const auto& [w, c] : model.counts) {
    ojson tokens = ojson::array();
    for (const auto& tok : w) tokens.push_back(tok.end_marker ? ojson(nullptr) : ojson(tok.values));
    windows.push_back({{"window", std::move(tokens)}, {"count", c}});
  }
  j["windows"] = std::move(windows);
  return j.dump() + "\n";
}

WindowModel parse_window_model(std::string_view json_text) {
  try {
    auto j = ojson::parse(json_text);
    if (j.at("format") != "bpad-tstide" || j.at("version") != 1) throw DataError("not a t-STIDE model (version 1)");
    WindowModel m;
    m.k = j.at("k");
    m.kind = j.at("kind") == "activity" ? WindowKind::Activity : WindowKind::ActivityAttributes;
    m.total = j.at("total");
    m.train_errors[Resolution::Trace] = j.at("train_errors").at("trace");
    m.train_errors[Resolution::Event] = j.at("train_errors").at("event");
    m.train_errors[Resolution::Attribute] = j.at("train_errors").at("attribute");
    std::uint64_t sum = 0;
    for (const auto& jw : j.at("windows")) {
      Window w;
      for (const auto& tok : jw.at("window")) {
        w.push_back(tok.is_null() ? EventToken{true, {}} : EventToken{false, tok.get<std::vector<std::string>>()});
      }
      const std::uint64_t c = jw.at("count");
      sum += c;
      m.counts.emplace(std::move(w), c);
    }
    if (sum != m.total) throw DataError("t-STIDE model counts do not sum to total");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("t-STIDE model: ") + e.what());
  }
}

// ---------------------------------------------------------------------------

ScoreReport random_baseline(const EventLog& log, double p, std::uint64_t seed) {
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("random baseline probability must lie in [0, 1]");
  Rng rng(derive_seed(seed, "random-baseline"));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  // Scores in (0, 1]; score > 1 - p happens with probability p.
  auto draw = [&] { return 1.0 - u(rng); };
  ScoreReport report;
  report.detector = "random";
  report.slot_names = slot_names_of(log.attribute_names());
  report.max_len = log.max_trace_len();
  for (const auto& trace : log.traces()) {
    TraceScore ts;
    ts.case_id = trace.case_id;
    ts.score = draw();
    for (std::size_t e = 0; e < trace.size(); ++e) {
      ts.events.push_back(draw());
      std::vector<double> row;
      for (std::size_t s = 0; s < report.slots_per_event(); ++s) row.push_back(draw());
      ts.slots.push_back(std::move(row));
    }
    report.traces.push_back(std::move(ts));
  }
  ResolutionMeans m;
  m.values = {1.0 - p, 1.0 - p, 1.0 - p};
  return apply_threshold(std::move(report), Threshold{1.0, m});
}

// ---------------------------------------------------------------------------

std::string report_jsonl(const ScoreReport& report) {
  std::string out;
  for (const auto& t : report.traces) {
    ojson j;
    j["case_id"] = t.case_id;
    j["score"] = t.score;
    j["anomaly"] = t.anomalous;
    ojson events = ojson::array();
    for (std::size_t e = 0; e < t.events.size(); ++e) {
      ojson slots = ojson::array();
      for (std::size_t s = 0; s < t.slots[e].size(); ++s) {
        slots.push_back({{"score", t.slots[e][s]}, {"anomaly", static_cast<bool>(t.slot_verdicts[e][s])}});
      }
      events.push_back(
          {{"score", t.events[e]}, {"anomaly", static_cast<bool>(t.event_verdicts[e])}, {"attrs", std::move(slots)}});
    }
    j["events"] = std::move(events);
    out += j.dump();
    out += '\n';
  }
  return out;
}

ScoreReport parse_report_jsonl(std::string_view content, const std::string& detector,
                               const std::vector<std::string>& slot_names) {
  ScoreReport report;
  report.detector = detector;
  report.slot_names = slot_names;
  std::istringstream in{std::string(content)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      auto j = ojson::parse(line);
      TraceScore t;
      t.case_id = j.at("case_id");
      t.score = j.at("score");
      t.anomalous = j.at("anomaly");
      for (const auto& je : j.at("events")) {
        t.events.push_back(je.at("score"));
        t.event_verdicts.push_back(je.at("anomaly").get<bool>());
        std::vector<double> scores;
        std::vector<bool> verdicts;
        for (const auto& js : je.at("attrs")) {
          scores.push_back(js.at("score"));
          verdicts.push_back(js.at("anomaly").get<bool>());
        }
        t.slots.push_back(std::move(scores));
        t.slot_verdicts.push_back(std::move(verdicts));
      }
      report.max_len = std::max(report.max_len, t.events.size());
      report.traces.push_back(std::move(t));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("scores", "line " + std::to_string(line_no), e.what());
    }
  }
  return report;
}

std::string heatmap_csv(const ScoreReport& report) {
  std::string out = "case_id";
  for (std::size_t e = 0; e < report.max_len; ++e) {
    for (const auto& name : report.slot_names) out += "," + std::to_string(e + 1) + ":" + name;
  }
  out += '\n';
  for (const auto& t : report.traces) {
    out += t.case_id;
    for (std::size_t e = 0; e < report.max_len; ++e) {
      for (std::size_t s = 0; s < report.slots_per_event(); ++s) {
        out += ',';
        if (e < t.slots.size()) out += format_double(t.slots[e][s]);
      }
    }
    out += '\n';
  }
  return out;
}

std::string heatmap_svg(const ScoreReport& report, const EventLog& log, const HeatmapOptions& options) {
  const std::size_t rows = std::min(options.max_traces, report.traces.size());
  const std::size_t events = std::min(options.max_events, report.max_len);
  const std::size_t spe = report.slots_per_event();
  const int cell_w = 96, cell_h = 22, label_w = 130, header_h = 40;
  double max_score = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const auto& t = report.traces[r];
    for (std::size_t e = 0; e < std::min(events, t.slots.size()); ++e) {
      for (double s : t.slots[e]) max_score = std::max(max_score, s);
    }
  }
  const int width = label_w + static_cast<int>(events * spe) * cell_w + 10;
  const int height = header_h + static_cast<int>(rows) * cell_h + 10;
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" font-family=\"sans-serif\" font-size=\"10\">\n";
  for (std::size_t e = 0; e < events; ++e) {
    for (std::size_t s = 0; s < spe; ++s) {
      const int x = label_w + static_cast<int>(e * spe + s) * cell_w;
      svg << "<text x=\"" << x + cell_w / 2 << "\" y=\"" << header_h - 8 << "\" text-anchor=\"middle\">"
          << e + 1 << ": " << xml_escape(report.slot_names[s]) << "</text>\n";
    }
  }
  for (std::size_t r = 0; r < rows; ++r) {
    const auto& t = report.traces[r];
    const int y = header_h + static_cast<int>(r) * cell_h;
    std::string tag = r < options.row_tags.size() ? options.row_tags[r] : t.case_id;
    svg << "<text x=\"4\" y=\"" << y + 15 << "\">" << xml_escape(tag) << "</text>\n";
    const auto idx = log.find_case(t.case_id);
    for (std::size_t e = 0; e < std::min(events, t.slots.size()); ++e) {
      for (std::size_t s = 0; s < spe; ++s) {
        const double v = max_score > 0.0 ? t.slots[e][s] / max_score : 0.0;
        const int shade = 255 - static_cast<int>(std::lround(v * 200.0));
        const int x = label_w + static_cast<int>(e * spe + s) * cell_w;
        svg << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell_w - 2 << "\" height=\"" << cell_h - 2
            << "\" fill=\"rgb(" << shade << "," << shade << ",255)\"/>\n";
        if (idx) {
          const auto& ev = log.trace(*idx).events.at(e);
          const std::string& text = s == 0 ? ev.activity : ev.attributes.at(s - 1);
          svg << "<text x=\"" << x + 4 << "\" y=\"" << y + 14 << "\" fill=\"" << (v > 0.6 ? "white" : "black")
              << "\">" << xml_escape(text) << "</text>\n";
        }
      }
    }
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace bpad
