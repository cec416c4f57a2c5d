#include "bpad/procgen.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <set>

#include "bpad/error.hpp"
#include "bpad/util.hpp"
#include "json.hpp"

namespace bpad {

namespace {

using ojson = nlohmann::ordered_json;

constexpr std::size_t kGenerationAttempts = 64;
constexpr std::size_t kUserAttempts = 1000;
constexpr double kMinVariantWeight = 0.05;

const std::vector<std::string>& user_names() {
  static const std::vector<std::string> names = {
      "Roy",    "Earl",   "James",  "Ryan",   "Marilyn", "Emily",  "Johnny", "Craig",  "Amanda", "Kevin",
      "Linda",  "Susan",  "Thomas", "Carol",  "Dennis",  "Joyce",  "Walter", "Irene",  "Arthur", "Gloria",
      "Harold", "Teresa", "Peter",  "Judith", "Gerald",  "Louise", "Albert", "Evelyn", "Philip", "Doris"};
  return names;
}

std::string activity_name(std::size_t i) {
  std::string name;
  ++i;
  while (i > 0) {
    --i;
    name.insert(name.begin(), static_cast<char>('A' + i % 26));
    i /= 26;
  }
  return name;
}

std::size_t uniform_index(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

std::string format_iso(long long seconds) {
  long long days = seconds / 86400;
  long long rem = seconds % 86400;
  // civil_from_days (Howard Hinnant)
  days += 719468;
  const long long era = (days >= 0 ? days : days - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(days - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  long long y = static_cast<long long>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  const unsigned d = doy - (153 * mp + 2) / 5 + 1;
  const unsigned m = mp < 10 ? mp + 3 : mp - 9;
  y += m <= 2;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04lld-%02u-%02uT%02lld:%02lld:%02lldZ", y, m, d, rem / 3600, (rem / 60) % 60,
                rem % 60);
  return buf;
}

// Layered construction: a spine of `max_len` activities plus detours. A detour
// leaves a node at layer lu and rejoins at layer lv > lu + m through m fresh
// activities on intermediate layers, so the longest path stays max_len.
struct Candidate {
  ProcessGraph graph;
  std::uint64_t paths = 0;
};

std::optional<Candidate> build_candidate(const GenConfig& cfg, std::size_t max_len, std::size_t detours, Rng& rng) {
  const std::size_t n = cfg.n_activities;
  // Node bookkeeping before relabeling: internal ids, 0 = START, 1 = END.
  std::vector<std::size_t> layer = {0, max_len + 1};
  std::set<std::pair<std::size_t, std::size_t>> edges;
  std::vector<std::size_t> out_degree = {0, 0};
  auto add_node = [&](std::size_t l) {
    layer.push_back(l);
    out_degree.push_back(0);
    return layer.size() - 1;
  };
  auto add_edge = [&](std::size_t u, std::size_t v) {
    edges.emplace(u, v);
    ++out_degree[u];
  };
  std::size_t prev = 0;
  for (std::size_t l = 1; l <= max_len; ++l) {
    auto v = add_node(l);
    add_edge(prev, v);
    prev = v;
  }
  add_edge(prev, 1);

  // Split the remaining activities over the detours.
  std::vector<std::size_t> sizes(detours, 0);
  for (std::size_t i = max_len; i < n; ++i) ++sizes[uniform_index(rng, detours)];
  std::sort(sizes.begin(), sizes.end(), std::greater<>());

  for (std::size_t m : sizes) {
    if (m + 1 > max_len + 1) return std::nullopt;
    bool placed = false;
    for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
      const std::size_t u = uniform_index(rng, layer.size());
      if (u == 1) continue;
      if (out_degree[u] >= 3) continue;
      std::vector<std::size_t> targets;
      for (std::size_t v = 0; v < layer.size(); ++v) {
        if (v == 0 || layer[v] <= layer[u] + m) continue;
        if (m == 0 && (edges.count({u, v}) || (u == 0 && v == 1))) continue;
        targets.push_back(v);
      }
      if (targets.empty()) continue;
      const std::size_t v = targets[uniform_index(rng, targets.size())];
      // Intermediate layers: strictly increasing within (layer[u], layer[v]).
      std::vector<std::size_t> free_layers;
      for (std::size_t l = layer[u] + 1; l < layer[v]; ++l) free_layers.push_back(l);
      std::vector<std::size_t> chosen;
      std::sample(free_layers.begin(), free_layers.end(), std::back_inserter(chosen), m, rng);
      std::size_t from = u;
      for (std::size_t l : chosen) {
        auto x = add_node(l);
        add_edge(from, x);
        from = x;
      }
      add_edge(from, v);
      placed = true;
    }
    if (!placed) return std::nullopt;
  }

  // Relabel activities by (layer, creation order).
  std::vector<std::size_t> acts;
  for (std::size_t i = 2; i < layer.size(); ++i) acts.push_back(i);
  std::stable_sort(acts.begin(), acts.end(), [&](std::size_t a, std::size_t b) { return layer[a] < layer[b]; });
  std::vector<std::size_t> relabel(layer.size());
  relabel[0] = 0;
  relabel[1] = n + 1;
  for (std::size_t i = 0; i < acts.size(); ++i) relabel[acts[i]] = i + 1;

  Candidate c;
  for (std::size_t i = 0; i < n; ++i) c.graph.activities.push_back(activity_name(i));
  for (const auto& [u, v] : edges) c.graph.edges.emplace_back(relabel[u], relabel[v]);
  std::sort(c.graph.edges.begin(), c.graph.edges.end());
  c.paths = c.graph.count_paths();
  return c;
}

double candidate_cost(const Candidate& c, const GenConfig& cfg) {
  if (cfg.target_variants == 0) return 0.0;
  return std::abs(std::log(static_cast<double>(c.paths)) - std::log(static_cast<double>(cfg.target_variants)));
}

ProcessModel with_variants(ProcessGraph graph, std::size_t cap) {
  ProcessModel model;
  auto paths = enumerate_variants(graph, cap);
  model.graph = std::move(graph);
  for (auto& p : paths) model.variants.push_back(Variant{std::move(p), std::nullopt});
  model.variant_probs.assign(model.variants.size(), 1.0 / static_cast<double>(model.variants.size()));
  return model;
}

}  // namespace

// ---------------------------------------------------------------------------

std::vector<std::vector<std::size_t>> ProcessGraph::successors() const {
  std::vector<std::vector<std::size_t>> succ(node_count());
  for (const auto& [u, v] : edges) {
    if (u >= node_count() || v >= node_count()) throw GenerationError("edge references an unknown node");
    succ[u].push_back(v);
  }
  for (auto& s : succ) {
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
  }
  return succ;
}

std::vector<std::size_t> ProcessGraph::topological_order() const {
  const auto succ = successors();
  std::vector<std::size_t> indegree(node_count(), 0);
  for (const auto& s : succ) {
    for (auto v : s) ++indegree[v];
  }
  if (indegree[start_node()] != 0) throw GenerationError("START has incoming edges");
  if (!succ[end_node()].empty()) throw GenerationError("END has outgoing edges");
  std::vector<std::size_t> order;
  std::vector<std::size_t> ready;
  for (std::size_t v = 0; v < node_count(); ++v) {
    if (indegree[v] == 0) ready.push_back(v);
  }
  while (!ready.empty()) {
    std::sort(ready.begin(), ready.end(), std::greater<>());
    auto v = ready.back();
    ready.pop_back();
    order.push_back(v);
    for (auto w : succ[v]) {
      if (--indegree[w] == 0) ready.push_back(w);
    }
  }
  if (order.size() != node_count()) throw GenerationError("process graph has a cycle");
  return order;
}

std::uint64_t ProcessGraph::count_paths() const {
  const auto order = topological_order();
  const auto succ = successors();
  std::vector<std::uint64_t> to_end(node_count(), 0);
  to_end[end_node()] = 1;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if (*it == end_node()) continue;
    std::uint64_t sum = 0;
    for (auto w : succ[*it]) sum += to_end[w];
    to_end[*it] = sum;
  }
  return to_end[start_node()];
}

std::size_t ProcessModel::max_variant_length() const {
  std::size_t m = 0;
  for (const auto& v : variants) m = std::max(m, v.activities.size());
  return m;
}

std::optional<std::size_t> ProcessModel::find_variant(const std::vector<std::string>& activities) const {
  for (std::size_t i = 0; i < variants.size(); ++i) {
    const auto& v = variants[i].activities;
    if (v.size() != activities.size()) continue;
    bool same = true;
    for (std::size_t k = 0; k < v.size() && same; ++k) same = graph.activities[v[k]] == activities[k];
    if (same) return i;
  }
  return std::nullopt;
}

std::optional<std::size_t> ProcessModel::activity_index(std::string_view name) const {
  for (std::size_t i = 0; i < graph.activities.size(); ++i) {
    if (graph.activities[i] == name) return i;
  }
  return std::nullopt;
}

std::optional<std::size_t> ProcessModel::user_index(std::string_view name) const {
  for (std::size_t i = 0; i < users.size(); ++i) {
    if (users[i] == name) return i;
  }
  return std::nullopt;
}

void GenConfig::validate() const {
  if (n_activities == 0) throw ConfigError("gen.n_activities must be positive");
  if (target_edges == 0) throw ConfigError("gen.target_edges must be positive");
  if (target_edges + 1 < n_activities) throw ConfigError("gen.target_edges must be at least n_activities - 1");
  if (max_users_per_activity == 0) throw ConfigError("gen.max_users_per_activity must be positive");
  if (variant_prob_sigma < 0.0) throw ConfigError("gen.variant_prob_sigma must be non-negative");
  if (target_max_len > n_activities) throw ConfigError("gen.target_max_len exceeds n_activities");
  if (max_variants == 0) throw ConfigError("gen.max_variants must be positive");
}

GenConfig profile_config(std::string_view name) {
  // Node counts include START and END.
  GenConfig cfg;
  auto set = [&](std::size_t nodes, std::size_t edges, std::size_t variants, std::size_t max_len) {
    cfg.n_activities = nodes - 2;
    cfg.target_edges = edges;
    cfg.target_variants = variants;
    cfg.target_max_len = max_len;
  };
  if (name == "small") set(22, 26, 6, 10);
  else if (name == "medium") set(34, 48, 25, 8);
  else if (name == "large") set(44, 56, 28, 12);
  else if (name == "huge") set(56, 75, 39, 11);
  else if (name == "wide") set(36, 53, 19, 7);
  else throw ConfigError("unknown model profile '" + std::string(name) + "'");
  return cfg;
}

std::vector<std::string> profile_names() { return {"small", "medium", "large", "huge", "wide"}; }

ProcessModel generate_model(const GenConfig& cfg) {
  cfg.validate();
  const std::size_t n = cfg.n_activities;
  if (n < 2) throw GenerationError("a process with fewer than 2 activities has a single variant");
  const std::size_t max_len =
      cfg.target_max_len ? cfg.target_max_len : std::max<std::size_t>(2, (n + 2) / 3);
  // Each detour adds one more edge than it adds nodes.
  std::size_t detours = cfg.target_edges > n + 1 ? cfg.target_edges - n - 1 : 0;
  if (detours == 0) {
    log::info("edge budget yields a single variant; adding one branch");
    detours = 1;
  }
  std::optional<Candidate> best;
  double best_cost = 0.0;
  for (std::size_t attempt = 0; attempt < kGenerationAttempts; ++attempt) {
    Rng rng(derive_seed(cfg.seed, "procgen/" + std::to_string(attempt)));
    auto c = build_candidate(cfg, max_len, detours, rng);
    if (!c || c->paths < 2 || c->paths > cfg.max_variants) continue;
    const double cost = candidate_cost(*c, cfg);
    if (!best || cost < best_cost) {
      best_cost = cost;
      best = std::move(c);
    }
    if (cost == 0.0) break;
  }
  if (!best) {
    throw GenerationError("could not generate a process model with " + std::to_string(n) + " activities and " +
                          std::to_string(cfg.target_edges) + " edges");
  }
  return with_variants(std::move(best->graph), cfg.max_variants);
}

std::vector<std::vector<std::size_t>> enumerate_variants(const ProcessGraph& graph, std::size_t cap) {
  const auto paths = graph.count_paths();
  if (paths > cap) {
    throw GenerationError("process graph has " + std::to_string(paths) + " variants, cap is " + std::to_string(cap));
  }
  const auto succ = graph.successors();
  std::vector<std::vector<std::size_t>> out;
  std::vector<std::size_t> path;
  std::function<void(std::size_t)> dfs = [&](std::size_t node) {
    if (node == graph.end_node()) {
      out.push_back(path);
      return;
    }
    for (auto next : succ[node]) {
      if (next != graph.end_node()) path.push_back(ProcessGraph::activity_of(next));
      dfs(next);
      if (next != graph.end_node()) path.pop_back();
    }
  };
  dfs(graph.start_node());
  // Successor lists are sorted, so DFS order is lexicographic except that
  // END (the largest id) ends a path early; sort to make the order exact.
  std::sort(out.begin(), out.end());
  return out;
}

std::optional<LtdPair> pick_ltd(const std::vector<std::size_t>& variant,
                                const std::vector<std::vector<std::size_t>>& permitted, std::uint64_t& state) {
  std::vector<LtdPair> candidates;
  for (std::size_t i = 0; i < variant.size(); ++i) {
    for (std::size_t j = i + 1; j < variant.size(); ++j) {
      const auto& a = permitted.at(variant[i]);
      const auto& b = permitted.at(variant[j]);
      std::vector<std::size_t> common;
      std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(common));
      if (!common.empty()) candidates.push_back(LtdPair{i, j});
    }
  }
  if (candidates.empty()) return std::nullopt;
  Rng rng(state);
  state = rng();
  return candidates[uniform_index(rng, candidates.size())];
}

ProcessModel assign_users(ProcessModel model, std::size_t n_users, std::size_t max_users_per_activity,
                          std::uint64_t seed) {
  if (model.variants.empty()) throw GenerationError("assign_users: model has no variants");
  if (max_users_per_activity == 0) throw ConfigError("max_users_per_activity must be positive");
  Rng rng(derive_seed(seed, "users"));
  if (n_users == 0) n_users = std::uniform_int_distribution<std::size_t>(10, 30)(rng);
  if (n_users > user_names().size()) {
    throw ConfigError("at most " + std::to_string(user_names().size()) + " users are supported");
  }
  const std::size_t n_act = model.graph.activities.size();
  model.users.assign(user_names().begin(), user_names().begin() + static_cast<std::ptrdiff_t>(n_users));
  std::vector<std::size_t> pool(n_users);
  std::iota(pool.begin(), pool.end(), 0);
  const std::size_t max_set = std::min(max_users_per_activity, n_users);

  for (std::size_t attempt = 0; attempt < kUserAttempts; ++attempt) {
    std::vector<std::vector<std::size_t>> permitted(n_act);
    for (auto& set : permitted) {
      const auto k = std::uniform_int_distribution<std::size_t>(1, max_set)(rng);
      std::sample(pool.begin(), pool.end(), std::back_inserter(set), k, rng);
    }
    // Every pool user is permitted somewhere, so clean logs exercise the whole pool.
    for (std::size_t u = 0; u < n_users; ++u) {
      bool used = std::any_of(permitted.begin(), permitted.end(), [&](const auto& s) {
        return std::find(s.begin(), s.end(), u) != s.end();
      });
      if (used) continue;
      std::vector<std::size_t> open;
      for (std::size_t a = 0; a < n_act; ++a) {
        if (permitted[a].size() < max_set) open.push_back(a);
      }
      if (open.empty()) break;
      auto& set = permitted[open[uniform_index(rng, open.size())]];
      set.push_back(u);
      std::sort(set.begin(), set.end());
    }
    bool ok = true;
    std::vector<Variant> variants = model.variants;
    std::uint64_t state = rng();
    for (auto& v : variants) {
      v.ltd.reset();
      if (v.activities.size() < 2) continue;
      v.ltd = pick_ltd(v.activities, permitted, state);
      if (!v.ltd) {
        ok = false;
        break;
      }
    }
    if (!ok) continue;
    model.permitted = std::move(permitted);
    model.variants = std::move(variants);
    return model;
  }
  throw GenerationError("could not find user sets with a long-term dependency for every variant");
}

ProcessModel with_random_variant_probs(ProcessModel model, double mu, double sigma, std::uint64_t seed) {
  if (model.variants.empty()) throw GenerationError("model has no variants");
  if (sigma < 0.0) throw ConfigError("variant probability sigma must be non-negative");
  Rng rng(derive_seed(seed, "variant-probs"));
  std::vector<double> w(model.variants.size());
  for (auto& x : w) {
    double draw = sigma > 0.0 ? std::normal_distribution<double>(mu, sigma)(rng) : mu;
    x = std::max(draw, kMinVariantWeight);
  }
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  for (auto& x : w) x /= total;
  model.variant_probs = std::move(w);
  return model;
}

EventLog sample_log(const ProcessModel& model, std::size_t n_traces, std::uint64_t seed) {
  if (n_traces == 0) throw ConfigError("sample_log: n_traces must be positive");
  if (!model.has_users()) throw GenerationError("sample_log: model has no user assignment");
  if (model.variant_probs.size() != model.variants.size()) throw GenerationError("sample_log: bad variant_probs");
  Rng rng(derive_seed(seed, "sample"));
  std::discrete_distribution<std::size_t> pick(model.variant_probs.begin(), model.variant_probs.end());
  const long long base = 1420070400;  // 2015-01-01T00:00:00Z
  std::vector<Trace> traces;
  traces.reserve(n_traces);
  for (std::size_t t = 0; t < n_traces; ++t) {
    const auto& variant = model.variants[pick(rng)];
    std::vector<std::size_t> users;
    for (auto a : variant.activities) {
      const auto& allowed = model.permitted[a];
      users.push_back(allowed[uniform_index(rng, allowed.size())]);
    }
    if (variant.ltd) {
      const auto& a = model.permitted[variant.activities[variant.ltd->first]];
      const auto& b = model.permitted[variant.activities[variant.ltd->second]];
      std::vector<std::size_t> common;
      std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(common));
      if (common.empty()) throw GenerationError("sample_log: unsatisfiable long-term dependency");
      const auto u = common[uniform_index(rng, common.size())];
      users[variant.ltd->first] = u;
      users[variant.ltd->second] = u;
    }
    Trace trace;
    trace.case_id = std::to_string(t + 1);
    const long long start = base + static_cast<long long>(t) * 3600;
    for (std::size_t k = 0; k < variant.activities.size(); ++k) {
      trace.events.push_back(Event{model.graph.activities[variant.activities[k]],
                                   format_iso(start + static_cast<long long>(k) * 60), {model.users[users[k]]}});
    }
    traces.push_back(std::move(trace));
  }
  return EventLog({std::string(kUserAttribute)}, std::move(traces));
}

ProcessModel builtin_p2p() {
  ProcessGraph g;
  g.activities = {"PR Created",  "PR Released",  "SC Created",    "SC Purchased",    "SC Approved",
                  "PO Created",  "PO Released",  "PO Decreased",  "PO Cancelled",    "Goods Receipt",
                  "Invoice Receipt", "Pay Invoice"};
  enum : std::size_t { S = 0, PRC, PRR, SCC, SCP, SCA, POC, POR, POD, POX, GR, IR, PAY, E };
  g.edges = {{S, PRC},   {S, SCC},   {PRC, PRR}, {SCC, SCP}, {SCP, SCA}, {PRR, POC}, {SCA, POC}, {POC, POR},
             {POR, POD}, {POR, POX}, {POR, GR},  {POD, GR},  {POX, E},   {GR, IR},   {IR, PAY},  {PAY, E}};
  std::sort(g.edges.begin(), g.edges.end());
  ProcessModel model = with_variants(std::move(g), 10000);
  model.users = {"Roy", "Earl", "James", "Ryan", "Marilyn", "Emily", "Johnny", "Craig", "Amanda", "Kevin", "Linda",
                 "Susan"};
  auto users = [&](std::initializer_list<const char*> names) {
    std::vector<std::size_t> ids;
    for (const char* n : names) ids.push_back(*model.user_index(n));
    std::sort(ids.begin(), ids.end());
    return ids;
  };
  model.permitted = {
      users({"Roy", "James", "Ryan"}),        // PR Created
      users({"Earl", "Kevin"}),               // PR Released
      users({"Marilyn", "Linda", "Amanda"}),  // SC Created
      users({"Emily", "Susan"}),              // SC Purchased
      users({"Roy", "Kevin"}),                // SC Approved
      users({"James", "Johnny", "Linda"}),    // PO Created
      users({"Roy", "Earl"}),                 // PO Released
      users({"Amanda", "Johnny"}),            // PO Decreased
      users({"Earl", "Craig"}),               // PO Cancelled
      users({"Ryan", "Craig", "Susan"}),      // Goods Receipt
      users({"Emily", "Linda", "Amanda"}),    // Invoice Receipt
      users({"Craig", "Kevin", "Susan"}),     // Pay Invoice
  };
  // Long-term dependencies, keyed by the activity pair that shares a user.
  const std::vector<std::pair<std::string, std::string>> ltd_by_variant = {
      {"PR Created", "Goods Receipt"},  // PR, no decrease
      {"PO Created", "PO Decreased"},   // PR, decrease
      {"PR Released", "PO Cancelled"},  // PR, cancelled
      {"SC Purchased", "Invoice Receipt"},
      {"SC Created", "PO Decreased"},
      {"SC Approved", "PO Released"},
  };
  auto position = [&](const Variant& v, const std::string& name) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < v.activities.size(); ++i) {
      if (model.graph.activities[v.activities[i]] == name) return i;
    }
    return std::nullopt;
  };
  auto has = [&](const Variant& v, const char* name) { return position(v, name).has_value(); };
  for (auto& v : model.variants) {
    const bool pr = has(v, "PR Created");
    const std::size_t row = (pr ? 0 : 3) + (has(v, "PO Decreased") ? 1 : has(v, "PO Cancelled") ? 2 : 0);
    const auto& [a, b] = ltd_by_variant[row];
    v.ltd = LtdPair{*position(v, a), *position(v, b)};
  }
  return model;
}

// ---------------------------------------------------------------------------
// JSON

std::string serialize_model(const ProcessModel& model) {
  ojson j;
  j["activities"] = model.graph.activities;
  ojson edges = ojson::array();
  for (const auto& [u, v] : model.graph.edges) edges.push_back({u, v});
  j["edges"] = std::move(edges);
  j["users"] = model.users;
  ojson permitted = ojson::object();
  for (std::size_t a = 0; a < model.permitted.size(); ++a) {
    ojson names = ojson::array();
    for (auto u : model.permitted[a]) names.push_back(model.users.at(u));
    permitted[model.graph.activities.at(a)] = std::move(names);
  }
  j["permitted_users"] = std::move(permitted);
  ojson variants = ojson::array();
  for (const auto& v : model.variants) {
    ojson jv;
    ojson names = ojson::array();
    for (auto a : v.activities) names.push_back(model.graph.activities.at(a));
    jv["activities"] = std::move(names);
    jv["ltd"] = v.ltd ? ojson::array({v.ltd->first, v.ltd->second}) : ojson(nullptr);
    variants.push_back(std::move(jv));
  }
  j["variants"] = std::move(variants);
  ojson probs = ojson::array();
  for (double p : model.variant_probs) probs.push_back(p);
  j["variant_probs"] = std::move(probs);
  return j.dump(2) + "\n";
}

ProcessModel parse_model(std::string_view json_text, std::string_view source) {
  try {
    auto j = ojson::parse(json_text);
    ProcessModel model;
    model.graph.activities = j.at("activities").get<std::vector<std::string>>();
    for (const auto& e : j.at("edges")) {
      model.graph.edges.emplace_back(e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>());
    }
    model.graph.topological_order();
    model.users = j.at("users").get<std::vector<std::string>>();
    if (j.contains("permitted_users") && !j.at("permitted_users").empty()) {
      model.permitted.resize(model.graph.activities.size());
      for (const auto& [name, users] : j.at("permitted_users").items()) {
        auto a = model.activity_index(name);
        if (!a) throw DataError("permitted_users references unknown activity '" + name + "'");
        for (const auto& u : users) {
          auto idx = model.user_index(u.get<std::string>());
          if (!idx) throw DataError("permitted_users references unknown user '" + u.get<std::string>() + "'");
          model.permitted[*a].push_back(*idx);
        }
        std::sort(model.permitted[*a].begin(), model.permitted[*a].end());
      }
    }
    for (const auto& jv : j.at("variants")) {
      Variant v;
      for (const auto& name : jv.at("activities")) {
        auto a = model.activity_index(name.get<std::string>());
        if (!a) throw DataError("variant references unknown activity");
        v.activities.push_back(*a);
      }
      if (!jv.at("ltd").is_null()) {
        v.ltd = LtdPair{jv.at("ltd").at(0).get<std::size_t>(), jv.at("ltd").at(1).get<std::size_t>()};
        if (v.ltd->first >= v.ltd->second || v.ltd->second >= v.activities.size()) {
          throw DataError("invalid long-term dependency positions");
        }
      }
      model.variants.push_back(std::move(v));
    }
    model.variant_probs = j.at("variant_probs").get<std::vector<double>>();
    if (model.variant_probs.size() != model.variants.size()) throw DataError("variant_probs length mismatch");
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string(source), "model", e.what());
  } catch (const GenerationError& e) {
    throw ParseError(std::string(source), "model", e.what());
  }
}

void write_model(const ProcessModel& model, const std::filesystem::path& path) {
  atomic_write(path, serialize_model(model));
}

ProcessModel read_model(const std::filesystem::path& path) { return parse_model(read_file(path), path.string()); }

}  // namespace bpad
