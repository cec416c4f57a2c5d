#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bpad/anomalies.hpp"
#include "bpad/detectors.hpp"
#include "bpad/eventlog.hpp"
#include "bpad/neuralnet.hpp"
#include "bpad/procgen.hpp"
#include "bpad/threshold.hpp"

namespace bpad {

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

/// Per-class metrics at one resolution; the anomaly class is the positive one.
struct MetricRow {
  Resolution resolution = Resolution::Trace;
  ClassMetrics normal;
  ClassMetrics anomaly;
  /// (normal.f1 + anomaly.f1) / 2
  double f1_macro = 0.0;
};

struct Confusion {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
};

/// Precision, recall and F1 per class; undefined ratios count as 0.
MetricRow metrics_from_confusion(Resolution resolution, const Confusion& c);

/// Metrics at trace, event and attribute resolution. Padded positions are
/// excluded. Throws DataError when report and labels cover different traces.
std::vector<MetricRow> score_to_metrics(const ScoreReport& report, const LabelSet& labels);

struct LabeledReport {
  ScoreReport report;
  LabelSet labels;
};

/// Default alpha candidates 1.0, 1.25, ..., 4.0.
std::vector<double> default_alpha_grid();

struct AlphaSearch {
  double best_alpha = 0.0;
  /// (alpha, mean trace-level macro F1 across logs) for every candidate.
  std::vector<std::pair<double, double>> curve;
};

/// The single alpha maximizing the mean trace-level macro F1 over all logs;
/// the first candidate wins ties. Throws ConfigError on an empty candidate list.
AlphaSearch grid_search_alpha(std::span<const LabeledReport> logs, std::span<const double> candidates);

// ---------------------------------------------------------------------------
// Experiments

/// Clean model plus noisy train/test logs with labels for one sweep cell.
struct Dataset {
  ProcessModel model;
  EventLog train_log;
  LabelSet train_labels;
  EventLog test_log;
  LabelSet test_labels;
  std::size_t capacity = 0;
};

struct DatasetSpec {
  /// "p2p" or a generator profile name.
  std::string model = "p2p";
  double train_noise = 0.1;
  double test_noise = 0.1;
  std::size_t train_size = 12500;
  std::size_t test_size = 2500;
  std::vector<AnomalyType> types = {kAllAnomalyTypes[0], kAllAnomalyTypes[1], kAllAnomalyTypes[2],
                                    kAllAnomalyTypes[3], kAllAnomalyTypes[4]};
  /// Graph structure seed (fixed per profile across cells).
  std::uint64_t graph_seed = 0;
  /// User sets, variant distribution, sampling and injection seed.
  std::uint64_t seed = 0;
};

/// Model (from profile or fixture), users, one variant distribution shared by
/// both logs, independent sampling and injection seeds.
Dataset build_dataset(const DatasetSpec& spec);

ProcessModel model_for(const std::string& name, std::uint64_t graph_seed, std::uint64_t seed);

/// Detector names: dae, tstide, tstide+, random.
struct DetectorSettings {
  std::size_t k = 4;
  double random_p = 0.5;
  TrainConfig train;
  bool unknown_column = false;
};

struct DetectorRun {
  /// Scores with verdicts at alpha = 1.
  ScoreReport report;
  double train_seconds = 0.0;
};

DetectorRun run_detector(const std::string& detector, const Dataset& data, const DetectorSettings& settings);

struct ExperimentSpec {
  std::vector<std::string> models = {"small"};
  std::vector<double> noise_levels = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  /// Test-log anomaly share; unset means "same as the training noise".
  std::optional<double> test_noise;
  std::vector<std::uint64_t> seeds = {1};
  std::vector<std::string> detectors = {"dae", "tstide", "tstide+", "random"};
  std::size_t train_size = 12500;
  std::size_t test_size = 2500;
  std::vector<AnomalyType> types = {kAllAnomalyTypes[0], kAllAnomalyTypes[1], kAllAnomalyTypes[2],
                                    kAllAnomalyTypes[3], kAllAnomalyTypes[4]};
  std::uint64_t graph_seed = 0;
  std::vector<double> alpha_grid = default_alpha_grid();
  DetectorSettings settings;
  std::filesystem::path out_dir;
  bool record_timing = false;

  void validate() const;
};

struct ResultRow {
  std::string model;
  double noise = 0.0;
  std::uint64_t seed = 0;
  std::string detector;
  double alpha = 0.0;
  MetricRow metrics;
  std::optional<double> train_seconds;
};

struct SummaryRow {
  std::string model;
  std::string noise;
  std::string detector;
  double alpha = 0.0;
  Resolution resolution = Resolution::Trace;
  std::size_t n = 0;
  double f1_macro_mean = 0.0, f1_macro_std = 0.0;
  double f1_normal_mean = 0.0, f1_normal_std = 0.0;
  double f1_anomaly_mean = 0.0, f1_anomaly_std = 0.0;
};

struct SweepResult {
  std::vector<ResultRow> rows;
  std::vector<SummaryRow> summary;
  std::map<std::string, double> alpha;
  std::vector<std::string> failures;
};

/// Runs every (model, noise, seed) cell and every detector, picks one alpha
/// per detector by grid search over all cells, and reports metrics at it.
/// With out_dir set, completed cells are cached under out_dir/cells and
/// results.csv, summary.csv, summary.md and sweep.json are written.
SweepResult run_sweep(const ExperimentSpec& spec);

std::string results_csv(const std::vector<ResultRow>& rows);
std::string summary_csv(const std::vector<SummaryRow>& rows);
std::string summary_markdown(const std::vector<SummaryRow>& rows);
std::string metrics_csv(const std::string& detector, const std::vector<MetricRow>& rows);

}  // namespace bpad
