#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bpad/eventlog.hpp"

namespace bpad {

/// Acyclic activity graph with distinguished START and END nodes.
///
/// Node ids: 0 is START, 1..n are activities 0..n-1, n+1 is END.
struct ProcessGraph {
  std::vector<std::string> activities;
  std::vector<std::pair<std::size_t, std::size_t>> edges;

  std::size_t node_count() const { return activities.size() + 2; }
  std::size_t start_node() const { return 0; }
  std::size_t end_node() const { return activities.size() + 1; }
  static std::size_t node_of(std::size_t activity) { return activity + 1; }
  static std::size_t activity_of(std::size_t node) { return node - 1; }

  double mean_out_degree() const {
    return static_cast<double>(edges.size()) / static_cast<double>(node_count());
  }
  std::vector<std::vector<std::size_t>> successors() const;
  /// Throws GenerationError on a cycle or an edge into START / out of END.
  std::vector<std::size_t> topological_order() const;
  /// Number of START -> END paths, by dynamic programming.
  std::uint64_t count_paths() const;

  bool operator==(const ProcessGraph&) const = default;
};

/// Positions (first < second) of a variant that must share one user.
struct LtdPair {
  std::size_t first = 0;
  std::size_t second = 0;

  bool operator==(const LtdPair&) const = default;
};

struct Variant {
  /// Activity indices, START and END excluded.
  std::vector<std::size_t> activities;
  std::optional<LtdPair> ltd;

  bool operator==(const Variant&) const = default;
};

struct ProcessModel {
  ProcessGraph graph;
  std::vector<std::string> users;
  /// permitted[activity] = sorted user indices.
  std::vector<std::vector<std::size_t>> permitted;
  std::vector<Variant> variants;
  std::vector<double> variant_probs;

  std::size_t max_variant_length() const;
  bool has_users() const { return !users.empty() && permitted.size() == graph.activities.size(); }
  /// Index of the variant whose activity sequence equals `activities`.
  std::optional<std::size_t> find_variant(const std::vector<std::string>& activities) const;
  std::optional<std::size_t> activity_index(std::string_view name) const;
  std::optional<std::size_t> user_index(std::string_view name) const;

  bool operator==(const ProcessModel&) const = default;
};

struct GenConfig {
  std::size_t n_activities = 20;
  std::size_t target_edges = 26;
  /// Best-effort variant count; 0 means no preference.
  std::size_t target_variants = 0;
  /// Longest variant length; 0 picks about a third of the activity count.
  std::size_t target_max_len = 0;
  std::uint64_t seed = 0;
  /// User pool size; 0 draws uniformly from [10, 30].
  std::size_t n_users = 0;
  std::size_t max_users_per_activity = 5;
  double variant_prob_mu = 1.0;
  double variant_prob_sigma = 0.2;
  std::size_t max_variants = 10000;

  void validate() const;
};

/// Model-size profiles matching the statistics of the evaluated models:
/// small, medium, large, huge, wide.
GenConfig profile_config(std::string_view name);
std::vector<std::string> profile_names();

/// Layered acyclic graph with enumerated variants and uniform variant_probs.
/// Users are not assigned. Deterministic in cfg.
ProcessModel generate_model(const GenConfig& cfg);

/// All START -> END paths as activity-index sequences, lexicographic by node id.
/// Throws GenerationError when the path count exceeds `cap`.
std::vector<std::vector<std::size_t>> enumerate_variants(const ProcessGraph& graph, std::size_t cap = 10000);

/// Draws a user pool, permitted sets and one long-term dependency per variant.
/// Every pool user is permitted for at least one activity.
ProcessModel assign_users(ProcessModel model, std::size_t n_users, std::size_t max_users_per_activity,
                          std::uint64_t seed);

/// Uniformly chosen position pair whose permitted user sets intersect, or none.
std::optional<LtdPair> pick_ltd(const std::vector<std::size_t>& variant,
                                const std::vector<std::vector<std::size_t>>& permitted, std::uint64_t& state);

/// Variant weights from Normal(mu, sigma), clamped below at 0.05, normalized.
ProcessModel with_random_variant_probs(ProcessModel model, double mu, double sigma, std::uint64_t seed);

/// Samples traces from variant_probs. Users are drawn from the permitted sets;
/// both LTD positions receive one user drawn from the intersection.
EventLog sample_log(const ProcessModel& model, std::size_t n_traces, std::uint64_t seed);

/// Fixed purchase-to-pay fixture: 14 nodes, 16 edges, 6 variants, max length 9.
ProcessModel builtin_p2p();

std::string serialize_model(const ProcessModel& model);
ProcessModel parse_model(std::string_view json_text, std::string_view source = "<memory>");
void write_model(const ProcessModel& model, const std::filesystem::path& path);
ProcessModel read_model(const std::filesystem::path& path);

/// The user attribute name used by generated logs.
inline constexpr std::string_view kUserAttribute = "user";

}  // namespace bpad
