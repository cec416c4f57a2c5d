#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string_view>

namespace bpad {

enum class Resolution { Trace = 0, Event = 1, Attribute = 2 };

inline constexpr Resolution kResolutions[] = {Resolution::Trace, Resolution::Event, Resolution::Attribute};

std::string_view to_string(Resolution r);

/// Mean training error per resolution.
struct ResolutionMeans {
  std::array<double, 3> values{0.0, 0.0, 0.0};

  double operator[](Resolution r) const { return values[static_cast<std::size_t>(r)]; }
  double& operator[](Resolution r) { return values[static_cast<std::size_t>(r)]; }
  bool operator==(const ResolutionMeans&) const = default;
};

/// tau = alpha * mean training error, one per resolution.
struct Threshold {
  double alpha = 2.0;
  ResolutionMeans mean;

  double tau(Resolution r) const { return alpha * mean[r]; }
  bool is_anomalous(Resolution r, double score) const { return score > tau(r); }
  Threshold with_alpha(double a) const { return Threshold{a, mean}; }
};

/// Arithmetic mean. Throws ConfigError on an empty list.
double mean_error(std::span<const double> errors);

/// Threshold from per-resolution training errors. Throws ConfigError when a
/// list is empty or alpha is negative.
Threshold fit_threshold(std::span<const double> trace_errors, std::span<const double> event_errors,
                        std::span<const double> attribute_errors, double alpha);

}  // namespace bpad
