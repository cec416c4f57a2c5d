#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "bpad/eventlog.hpp"
#include "bpad/procgen.hpp"

namespace bpad {

struct InjectConfig {
  /// Fraction of traces that receive exactly one anomaly.
  double noise_level = 0.0;
  std::vector<AnomalyType> enabled_types = {kAllAnomalyTypes[0], kAllAnomalyTypes[1], kAllAnomalyTypes[2],
                                            kAllAnomalyTypes[3], kAllAnomalyTypes[4]};
  std::uint64_t seed = 0;
  /// Encoder capacity: rework is not applied to traces of this length.
  /// 0 means unbounded.
  std::size_t max_trace_len = 0;

  void validate() const;
};

struct InjectResult {
  EventLog log;
  LabelSet labels;
  std::vector<AnomalyRecord> records;
};

/// True for the anomaly types that need the model's user permissions.
bool needs_model(AnomalyType type);

/// Mutates floor(noise_level * |log|) traces chosen uniformly without
/// replacement. Each receives one anomaly whose type is uniform over the
/// enabled types applicable to that trace. `model` may be null when only
/// skip/switch/rework are enabled.
InjectResult inject(const EventLog& log, const ProcessModel* model, const InjectConfig& cfg);

/// Types among `enabled` that can be applied to `trace`.
std::vector<AnomalyType> applicable_types(const Trace& trace, std::size_t user_attr, const ProcessModel* model,
                                          const std::vector<AnomalyType>& enabled, std::size_t max_trace_len);

}  // namespace bpad
