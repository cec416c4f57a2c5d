#include "bpad/threshold.hpp"

#include "bpad/error.hpp"

namespace bpad {

std::string_view to_string(Resolution r) {
  switch (r) {
    case Resolution::Trace: return "trace";
    case Resolution::Event: return "event";
    case Resolution::Attribute: return "attribute";
  }
  return "?";
}

double mean_error(std::span<const double> errors) {
  if (errors.empty()) throw ConfigError("mean of an empty error list");
  double sum = 0.0;
  for (double e : errors) sum += e;
  return sum / static_cast<double>(errors.size());
}

Threshold fit_threshold(std::span<const double> trace_errors, std::span<const double> event_errors,
                        std::span<const double> attribute_errors, double alpha) {
  if (!(alpha >= 0.0)) throw ConfigError("alpha must be non-negative");
  Threshold t;
  t.alpha = alpha;
  t.mean[Resolution::Trace] = mean_error(trace_errors);
  t.mean[Resolution::Event] = mean_error(event_errors);
  t.mean[Resolution::Attribute] = mean_error(attribute_errors);
  return t;
}

}  // namespace bpad
