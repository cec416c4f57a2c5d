#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "bpad/eventlog.hpp"
#include "bpad/neuralnet.hpp"
#include "bpad/threshold.hpp"

namespace bpad {

struct TraceScore {
  std::string case_id;
  double score = 0.0;
  bool anomalous = false;
  std::vector<double> events;
  std::vector<bool> event_verdicts;
  /// slots[event][slot], real events only.
  std::vector<std::vector<double>> slots;
  std::vector<std::vector<bool>> slot_verdicts;
};

/// Scores and verdicts at trace, event and attribute resolution.
/// Every verdict equals (score > tau) at its resolution.
struct ScoreReport {
  std::string detector;
  std::vector<std::string> slot_names;
  std::size_t max_len = 0;
  Threshold threshold;
  std::vector<TraceScore> traces;

  std::size_t slots_per_event() const { return slot_names.size(); }
  std::size_t anomaly_count() const;
};

/// Recomputes every verdict from the scores for a new threshold.
ScoreReport apply_threshold(ScoreReport report, const Threshold& threshold);

// ---------------------------------------------------------------------------
// Denoising autoencoder

/// Trace score is the full-row MSE, event score the mean of its slot MSEs,
/// attribute score the slot MSE. tau = alpha * the network's training means.
ScoreReport dae_score(const TrainedNetwork& model, const EventLog& log, double alpha);

// ---------------------------------------------------------------------------
// t-STIDE family

enum class WindowKind { Activity, ActivityAttributes };

struct EventToken {
  /// Marks the end of a trace shorter than the window.
  bool end_marker = false;
  std::vector<std::string> values;

  auto operator<=>(const EventToken&) const = default;
};

using Window = std::vector<EventToken>;

/// Window frequencies from a training log.
struct WindowModel {
  std::size_t k = 4;
  WindowKind kind = WindowKind::Activity;
  std::map<Window, std::uint64_t> counts;
  std::uint64_t total = 0;
  /// Mean training scores per resolution, for the threshold.
  ResolutionMeans train_errors;

  std::uint64_t count(const Window& w) const;
};

inline constexpr double kUnseenWindowCount = 0.5;

/// Sliding windows of a trace with the index of each window's last event.
/// A trace shorter than k yields one truncated window closed by an end marker.
std::vector<std::pair<Window, std::size_t>> trace_windows(const Trace& trace, std::size_t k, WindowKind kind);

/// -log(max(count, 0.5) / total)
double window_score(const WindowModel& model, const Window& window);

WindowModel tstide_fit(const EventLog& log, std::size_t k, WindowKind kind);

/// Trace score is the max window score; each window's score is assigned to
/// its last event (and, for attributes, to that event's slots), keeping the
/// max. Activity-only windows score only the activity slot.
ScoreReport tstide_score(const WindowModel& model, const EventLog& log, double alpha);

std::string serialize_window_model(const WindowModel& model);
WindowModel parse_window_model(std::string_view json_text);

// ---------------------------------------------------------------------------
// Random baseline

/// Each verdict is anomalous with probability p, at every resolution.
ScoreReport random_baseline(const EventLog& log, double p, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Output

/// One JSON object per trace with scores and verdicts.
std::string report_jsonl(const ScoreReport& report);
ScoreReport parse_report_jsonl(std::string_view content, const std::string& detector,
                               const std::vector<std::string>& slot_names);

/// Rows = traces, columns = max_len * slots_per_event; padded cells empty.
std::string heatmap_csv(const ScoreReport& report);

struct HeatmapOptions {
  std::size_t max_traces = 12;
  std::size_t max_events = 6;
  std::vector<std::string> row_tags;
};

/// Slot grid with darkness proportional to the score; cells show the log's values.
std::string heatmap_svg(const ScoreReport& report, const EventLog& log, const HeatmapOptions& options = {});

}  // namespace bpad
