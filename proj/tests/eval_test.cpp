#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "bpad/error.hpp"
#include "bpad/eval.hpp"
#include "oracles.hpp"

using namespace bpad;

namespace {

// One-event traces without attributes; verdicts set directly.
LabeledReport binary_case(const std::vector<bool>& pred, const std::vector<bool>& truth) {
  LabeledReport out;
  out.report.detector = "test";
  out.report.slot_names = {"activity"};
  out.report.max_len = 1;
  out.labels.max_len = 1;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    TraceScore t;
    t.case_id = std::to_string(i);
    t.score = pred[i] ? 1.0 : 0.0;
    t.events = {t.score};
    t.slots = {{t.score}};
    out.report.traces.push_back(t);
    TraceLabels l;
    l.case_id = t.case_id;
    l.slots = {{truth[i]}};
    if (truth[i]) l.anomaly = AnomalyRecord{t.case_id, AnomalyType::Skip, {0}, {SlotRef{0, 0}}};
    out.labels.traces.push_back(l);
  }
  ResolutionMeans m;
  m.values = {0.5, 0.5, 0.5};
  out.report = apply_threshold(out.report, Threshold{1.0, m});
  return out;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("perfect predictions give F1 1 everywhere") {
  const std::vector<bool> truth = {true, false, false, true, false};
  const auto c = binary_case(truth, truth);
  for (const auto& row : score_to_metrics(c.report, c.labels)) {
    CHECK(row.f1_macro == 1.0);
    CHECK(row.anomaly.precision == 1.0);
    CHECK(row.normal.recall == 1.0);
  }
}

TEST_CASE("flagging everything on a balanced set") {
  const auto c = binary_case({true, true, true, true}, {true, false, true, false});
  const auto row = score_to_metrics(c.report, c.labels)[0];
  CHECK(row.normal.f1 == 0.0);
  CHECK(row.normal.precision == 0.0);
  CHECK(row.anomaly.f1 == doctest::Approx(2.0 / 3.0));
  CHECK(row.f1_macro == doctest::Approx(1.0 / 3.0));
  CHECK(row.anomaly.support == 2);
  CHECK(row.normal.support == 2);
}

TEST_CASE("metrics match an independent confusion count") {
  std::mt19937_64 rng(2);
  std::bernoulli_distribution b(0.4);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<bool> pred(37), truth(37);
    for (std::size_t i = 0; i < pred.size(); ++i) {
      pred[i] = b(rng);
      truth[i] = b(rng);
    }
    const auto c = binary_case(pred, truth);
    const auto ref = oracle::binary_f1(pred, truth);
    for (const auto& row : score_to_metrics(c.report, c.labels)) {
      CHECK(row.anomaly.f1 == doctest::Approx(ref.f1_pos).epsilon(1e-14));
      CHECK(row.normal.f1 == doctest::Approx(ref.f1_neg).epsilon(1e-14));
    }
  }
}

TEST_CASE("mismatched reports are rejected") {
  auto c = binary_case({true, false}, {true, false});
  c.labels.traces[1].case_id = "x";
  CHECK_THROWS_AS(score_to_metrics(c.report, c.labels), DataError);
  c = binary_case({true, false}, {true, false});
  c.labels.traces.pop_back();
  CHECK_THROWS_AS(score_to_metrics(c.report, c.labels), DataError);
}

TEST_CASE("alpha grid search") {
  // Scores 0..9 against tau = alpha * 1; anomalies are the traces scoring above 4.5.
  LabeledReport l = binary_case(std::vector<bool>(10, false), {false, false, false, false, false, true, true, true,
                                                               true, true});
  for (std::size_t i = 0; i < 10; ++i) {
    l.report.traces[i].score = static_cast<double>(i);
    l.report.traces[i].events = {static_cast<double>(i)};
    l.report.traces[i].slots = {{static_cast<double>(i)}};
  }
  l.report.threshold.mean.values = {1.0, 1.0, 1.0};
  const std::vector<LabeledReport> logs = {l};
  const std::vector<double> one = {2.0};
  CHECK(grid_search_alpha(logs, one).best_alpha == 2.0);
  CHECK_THROWS_AS(grid_search_alpha(logs, std::vector<double>{}), ConfigError);
  std::vector<double> dense;
  for (int i = 0; i <= 100; ++i) dense.push_back(i * 0.1);
  const auto s = grid_search_alpha(logs, dense);
  CHECK(s.best_alpha == doctest::Approx(4.0));
  CHECK(s.curve.size() == dense.size());
  const std::vector<double> extremes = {0.0, 1e9};
  const auto e = grid_search_alpha(logs, extremes);
  CHECK(e.curve[0].second == doctest::Approx((10.0 / 14.0 + 1.0 / 3.0) / 2.0));
  CHECK(e.curve[1].second == doctest::Approx(1.0 / 3.0));
  CHECK(e.best_alpha == 0.0);
  const auto grid = default_alpha_grid();
  CHECK(grid.size() == 13);
  CHECK(grid.front() == 1.0);
  CHECK(grid.back() == 4.0);
}

TEST_CASE("random baseline at 30% anomalies") {
  // Expected macro F1 with verdict probability 1/2 and anomaly share r:
  // (r / (r + 1/2) + (1 - r) / (3/2 - r)) / 2.
  auto expected = [](double r) { return (r / (r + 0.5) + (1.0 - r) / (1.5 - r)) / 2.0; };
  DatasetSpec spec;
  spec.train_size = 10;
  spec.test_size = 2500;
  spec.test_noise = 0.3;
  spec.seed = 4;
  const auto data = build_dataset(spec);
  const auto rows = score_to_metrics(random_baseline(data.test_log, 0.5, 1), data.test_labels);
  CHECK(rows[0].f1_macro == doctest::Approx(expected(0.3)).epsilon(0.06));
  CHECK(std::abs(rows[0].f1_macro - 0.479) <= 0.03);

  double sum = 0.0, sum_expected = 0.0;
  for (int i = 1; i <= 10; ++i) {
    spec.test_noise = i / 10.0;
    spec.seed = 10 + static_cast<std::uint64_t>(i);
    const auto d = build_dataset(spec);
    sum += score_to_metrics(random_baseline(d.test_log, 0.5, 2), d.test_labels)[0].f1_macro;
    sum_expected += i == 10 ? 0.5 * (1.0 / 1.5) : expected(i / 10.0);
  }
  CHECK(std::abs(sum / 10.0 - sum_expected / 10.0) <= 0.02);
  // Average over the ten noise levels reported for the baseline.
  CHECK(std::abs(sum / 10.0 - 0.44) <= 0.03);
}

TEST_CASE("a one-cell sweep writes one row per resolution and resumes from its cache") {
  const auto dir = std::filesystem::temp_directory_path() / "bpad_sweep_test";
  std::filesystem::remove_all(dir);
  ExperimentSpec spec;
  spec.models = {"p2p"};
  spec.noise_levels = {0.3};
  spec.seeds = {1};
  spec.detectors = {"tstide", "random"};
  spec.train_size = 300;
  spec.test_size = 100;
  spec.out_dir = dir;
  const auto a = run_sweep(spec);
  CHECK(a.failures.empty());
  CHECK(a.rows.size() == 6);
  CHECK(a.alpha.at("random") == 1.0);
  CHECK(std::filesystem::exists(dir / "results.csv"));
  CHECK(std::filesystem::exists(dir / "summary.md"));
  CHECK(std::filesystem::exists(dir / "sweep.json"));
  REQUIRE(std::filesystem::exists(dir / "cells"));
  const auto results = slurp(dir / "results.csv");
  const auto summary = slurp(dir / "summary.csv");
  std::filesystem::remove(dir / "results.csv");
  std::filesystem::remove(dir / "summary.csv");
  const auto b = run_sweep(spec);
  CHECK(slurp(dir / "results.csv") == results);
  CHECK(slurp(dir / "summary.csv") == summary);
  std::filesystem::remove_all(dir / "cells");
  run_sweep(spec);
  CHECK(slurp(dir / "results.csv") == results);
  std::filesystem::remove_all(dir);

  spec.out_dir.clear();
  spec.detectors = {"nope"};
  CHECK_THROWS_AS(run_sweep(spec), ConfigError);
}

TEST_CASE("summary markdown uses mean and spread") {
  SummaryRow r;
  r.model = "p2p";
  r.noise = "0.3";
  r.detector = "dae";
  r.n = 3;
  r.f1_macro_mean = 0.912;
  r.f1_macro_std = 0.051;
  const auto md = summary_markdown({r});
  CHECK(md.find("0.91 ± 0.05") != std::string::npos);
}
