#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "bpad/detectors.hpp"
#include "bpad/error.hpp"
#include "bpad/procgen.hpp"
#include "oracles.hpp"

using namespace bpad;

namespace {

EventLog toy_log(Rng& rng, std::size_t n_attrs) {
  std::uniform_int_distribution<std::size_t> n_traces(1, 10), len(1, 8), act(0, 3), usr(0, 2);
  std::vector<std::string> names;
  for (std::size_t a = 0; a < n_attrs; ++a) names.push_back("attr" + std::to_string(a));
  std::vector<Trace> traces;
  const std::size_t n = n_traces(rng);
  for (std::size_t t = 0; t < n; ++t) {
    Trace tr{std::to_string(t), {}};
    const std::size_t l = len(rng);
    for (std::size_t i = 0; i < l; ++i) {
      Event e{std::string(1, static_cast<char>('A' + act(rng))), {}, {}};
      for (std::size_t a = 0; a < n_attrs; ++a) e.attributes.push_back("u" + std::to_string(usr(rng)));
      tr.events.push_back(std::move(e));
    }
    traces.push_back(std::move(tr));
  }
  return EventLog(names, std::move(traces));
}

}  // namespace

TEST_CASE("t-STIDE counts and scores match the brute-force oracle") {
  Rng rng(11);
  for (int rep = 0; rep < 20; ++rep) {
    const auto train = toy_log(rng, 1);
    const auto test = toy_log(rng, 1);
    for (bool plus : {false, true}) {
      const auto kind = plus ? WindowKind::ActivityAttributes : WindowKind::Activity;
      for (std::size_t k : {2u, 3u, 4u}) {
        const auto model = tstide_fit(train, k, kind);
        const auto table = oracle::stide_fit(train, k, plus);
        REQUIRE(model.total == table.total);
        REQUIRE(model.counts.size() == table.rows.size());
        for (const auto& [w, c] : table.rows) CHECK(model.count(oracle::to_window(w)) == c);
        const auto report = tstide_score(model, test, 2.0);
        for (std::size_t t = 0; t < test.size(); ++t) {
          CHECK(report.traces[t].score == oracle::stide_trace_score(table, test.trace(t), k, plus));
        }
      }
    }
  }
}

TEST_CASE("window extraction") {
  const Trace t{"1", {Event{"A", {}, {}}, Event{"B", {}, {}}, Event{"C", {}, {}}, Event{"D", {}, {}},
                      Event{"E", {}, {}}}};
  const auto ws = trace_windows(t, 4, WindowKind::Activity);
  REQUIRE(ws.size() == 2);
  CHECK(ws[0].second == 3);
  CHECK(ws[1].second == 4);
  const Trace shorter{"2", {Event{"A", {}, {}}, Event{"B", {}, {}}}};
  const auto one = trace_windows(shorter, 4, WindowKind::Activity);
  REQUIRE(one.size() == 1);
  CHECK(one[0].first.size() == 3);
  CHECK(one[0].first.back().end_marker);
  CHECK(one[0].second == 1);
  CHECK_THROWS_AS(trace_windows(t, 1, WindowKind::Activity), ConfigError);
}

TEST_CASE("unseen windows get the maximal score") {
  const EventLog train({}, {Trace{"1", {Event{"A", {}, {}}, Event{"B", {}, {}}}}});
  const auto model = tstide_fit(train, 2, WindowKind::Activity);
  Window unseen = {EventToken{false, {"B"}}, EventToken{false, {"A"}}};
  CHECK(window_score(model, unseen) == doctest::Approx(-std::log(0.5)));
  CHECK(window_score(model, trace_windows(train.trace(0), 2, WindowKind::Activity)[0].first) == 0.0);
}

TEST_CASE("t-STIDE on one variant scores every training window alike") {
  const auto m = builtin_p2p();
  ProcessModel one = m;
  one.variant_probs.assign(m.variants.size(), 0.0);
  one.variant_probs[0] = 1.0;
  const auto log = sample_log(one, 40, 1);
  const auto model = tstide_fit(log, 4, WindowKind::Activity);
  std::set<double> scores;
  for (const auto& t : log.traces()) {
    for (const auto& [w, last] : trace_windows(t, 4, WindowKind::Activity)) scores.insert(window_score(model, w));
  }
  CHECK(scores.size() == 1);
}

TEST_CASE("t-STIDE+ without attributes equals t-STIDE") {
  Rng rng(5);
  for (int rep = 0; rep < 10; ++rep) {
    const auto train = toy_log(rng, 0);
    const auto test = toy_log(rng, 0);
    const auto a = tstide_score(tstide_fit(train, 3, WindowKind::Activity), test, 1.5);
    const auto b = tstide_score(tstide_fit(train, 3, WindowKind::ActivityAttributes), test, 1.5);
    for (std::size_t t = 0; t < test.size(); ++t) {
      CHECK(a.traces[t].score == b.traces[t].score);
      CHECK(a.traces[t].events == b.traces[t].events);
      CHECK(a.traces[t].slots == b.traces[t].slots);
      CHECK(a.traces[t].slot_verdicts == b.traces[t].slot_verdicts);
    }
  }
}

TEST_CASE("event and slot scores come from the last event of each window") {
  const EventLog train({"user"}, {Trace{"1", {Event{"A", {}, {"x"}}, Event{"B", {}, {"x"}}, Event{"C", {}, {"x"}}}}});
  const EventLog test({"user"}, {Trace{"1", {Event{"A", {}, {"x"}}, Event{"B", {}, {"y"}}, Event{"C", {}, {"x"}}}}});
  const auto plus = tstide_score(tstide_fit(train, 2, WindowKind::ActivityAttributes), test, 1.0);
  const auto& t = plus.traces[0];
  const double unseen = -std::log(0.5 / 2.0);
  CHECK(t.events[0] == 0.0);
  CHECK(t.events[1] == doctest::Approx(unseen));
  CHECK(t.events[2] == doctest::Approx(unseen));
  CHECK(t.slots[1][1] == doctest::Approx(unseen));
  const auto plain = tstide_score(tstide_fit(train, 2, WindowKind::Activity), test, 1.0);
  CHECK(plain.traces[0].slots[1][1] == 0.0);
  CHECK(plain.traces[0].score == 0.0 + -std::log(1.0 / 2.0));
}

TEST_CASE("raising alpha never adds anomalies") {
  Rng rng(9);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  ScoreReport base;
  base.slot_names = {"activity", "user"};
  for (int t = 0; t < 30; ++t) {
    TraceScore ts;
    ts.case_id = std::to_string(t);
    ts.score = u(rng);
    ts.events = {u(rng), u(rng)};
    ts.slots = {{u(rng), u(rng)}, {u(rng), u(rng)}};
    base.traces.push_back(ts);
  }
  ResolutionMeans m;
  m.values = {1.0, 1.0, 1.0};
  std::size_t prev = base.traces.size() + 1;
  for (double a = 0.0; a <= 5.0; a += 0.25) {
    const auto r = apply_threshold(base, Threshold{a, m});
    CHECK(r.anomaly_count() <= prev);
    prev = r.anomaly_count();
    for (const auto& t : r.traces) CHECK(t.anomalous == (t.score > a));
  }
}

TEST_CASE("random baseline flags about p of everything") {
  const auto log = sample_log(with_random_variant_probs(builtin_p2p(), 1, 0.2, 1), 4000, 2);
  for (double p : {0.2, 0.5}) {
    const auto r = random_baseline(log, p, 3);
    CHECK(static_cast<double>(r.anomaly_count()) / 4000.0 == doctest::Approx(p).epsilon(0.1));
    CHECK(r.threshold.tau(Resolution::Attribute) == doctest::Approx(1.0 - p));
    for (const auto& t : r.traces) {
      CHECK(t.score > 0.0);
      CHECK(t.score <= 1.0);
    }
  }
  CHECK(report_jsonl(random_baseline(log, 0.5, 3)) == report_jsonl(random_baseline(log, 0.5, 3)));
  CHECK_THROWS_AS(random_baseline(log, 1.5, 3), ConfigError);
}

TEST_CASE("score files round trip and heatmaps have one cell per slot") {
  const auto m = with_random_variant_probs(builtin_p2p(), 1, 0.2, 1);
  const auto log = sample_log(m, 30, 2);
  const auto model = tstide_fit(log, 4, WindowKind::ActivityAttributes);
  const auto report = tstide_score(model, log, 1.0);
  const auto back = parse_report_jsonl(report_jsonl(report), report.detector, report.slot_names);
  REQUIRE(back.traces.size() == report.traces.size());
  for (std::size_t i = 0; i < back.traces.size(); ++i) {
    CHECK(back.traces[i].score == report.traces[i].score);
    CHECK(back.traces[i].slot_verdicts == report.traces[i].slot_verdicts);
  }
  const auto csv = heatmap_csv(report);
  std::size_t lines = 0;
  for (char c : csv) lines += c == '\n';
  CHECK(lines == 31);
  const auto header = csv.substr(0, csv.find('\n'));
  CHECK(static_cast<std::size_t>(std::count(header.begin(), header.end(), ',')) == report.max_len * 2);
  CHECK(header.rfind("case_id,1:activity,1:user,2:activity", 0) == 0);
  const auto svg = heatmap_svg(report, log);
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(parse_window_model(serialize_window_model(model)).counts == model.counts);
  CHECK(parse_window_model(serialize_window_model(model)).train_errors == model.train_errors);
}
