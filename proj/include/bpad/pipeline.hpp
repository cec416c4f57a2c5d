#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bpad/anomalies.hpp"
#include "bpad/detectors.hpp"
#include "bpad/eval.hpp"
#include "bpad/eventlog.hpp"
#include "bpad/neuralnet.hpp"
#include "bpad/procgen.hpp"
#include "json.hpp"

namespace bpad {

/// Everything the command-line pipeline needs. Serialized as one JSON
/// document with sections seed, gen, inject, train, detector, eval, heatmap
/// and paths.
struct PipelineConfig {
  std::uint64_t seed = 0;

  /// "p2p", a profile name, or "custom" (uses `gen`).
  std::string model = "p2p";
  GenConfig gen;
  std::uint64_t graph_seed = 0;
  std::size_t train_size = 12500;
  std::size_t test_size = 2500;

  double train_noise = 0.1;
  double test_noise = 0.1;
  std::vector<AnomalyType> types = {kAllAnomalyTypes[0], kAllAnomalyTypes[1], kAllAnomalyTypes[2],
                                    kAllAnomalyTypes[3], kAllAnomalyTypes[4]};
  /// 0: longest variant + 1 when a model is known, else the log's max length.
  std::size_t capacity = 0;

  TrainConfig train;

  std::string detector = "dae";
  double alpha = 2.0;
  std::size_t k = 4;
  double random_p = 0.5;
  bool unknown_column = false;

  ExperimentSpec eval;
  HeatmapOptions heatmap;

  std::filesystem::path out_dir = "out";
  LogFormat format = LogFormat::Jsonl;
  /// Input overrides; empty means the default file in out_dir.
  std::filesystem::path model_path, train_log, test_log, train_labels, test_labels;
};

nlohmann::ordered_json config_to_json(const PipelineConfig& cfg);
/// Throws ConfigError naming the key path on unknown keys or bad values.
PipelineConfig config_from_json(const nlohmann::ordered_json& j);

/// Applies "section.key=value"; the value is read as JSON when it parses,
/// otherwise as a string.
void apply_override(nlohmann::ordered_json& doc, std::string_view assignment);

/// Defaults, then the config file (if any), then the overrides in order.
PipelineConfig load_config(const std::optional<std::filesystem::path>& file, const std::vector<std::string>& sets);

// Commands. Each writes into cfg.out_dir and echoes the config there.

/// model.json, train and test logs without anomalies.
void cmd_generate(const PipelineConfig& cfg);
/// Noisy train/test logs with label sidecars.
void cmd_inject(const PipelineConfig& cfg);
/// Fits the configured detector on the noisy training log.
void cmd_train(const PipelineConfig& cfg);
/// Scores the noisy test log; writes scores, heatmap CSV and SVG.
void cmd_score(const PipelineConfig& cfg);
/// Metrics of the stored scores against the test labels.
void cmd_evaluate(const PipelineConfig& cfg);
void cmd_sweep(const PipelineConfig& cfg);
/// Re-renders heatmaps from stored scores.
void cmd_heatmap(const PipelineConfig& cfg);

/// File stem for a detector's outputs ("tstide+" becomes "tstide_plus").
std::string detector_stem(const std::string& detector);

}  // namespace bpad
