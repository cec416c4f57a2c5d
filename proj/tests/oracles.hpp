// Independent reference implementations used by the tests. None of these call
// into the library code they check.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "bpad/anomalies.hpp"
#include "bpad/detectors.hpp"
#include "bpad/eventlog.hpp"
#include "bpad/neuralnet.hpp"
#include "bpad/procgen.hpp"

namespace oracle {

// ---------------------------------------------------------------------------
// t-STIDE by linear scan over a list of (window, count) pairs.

struct Tok {
  bool end = false;
  std::vector<std::string> vals;
  bool operator==(const Tok&) const = default;
};
using Win = std::vector<Tok>;

inline std::vector<Win> windows(const bpad::Trace& t, std::size_t k, bool with_attrs) {
  auto tok = [&](const bpad::Event& e) {
    Tok x;
    x.vals.push_back(e.activity);
    if (with_attrs) x.vals.insert(x.vals.end(), e.attributes.begin(), e.attributes.end());
    return x;
  };
  std::vector<Win> out;
  if (t.events.size() < k) {
    Win w;
    for (const auto& e : t.events) w.push_back(tok(e));
    w.push_back(Tok{true, {}});
    out.push_back(w);
    return out;
  }
  for (std::size_t i = 0; i + k <= t.events.size(); ++i) {
    Win w;
    for (std::size_t j = i; j < i + k; ++j) w.push_back(tok(t.events[j]));
    out.push_back(w);
  }
  return out;
}

struct StideTable {
  std::vector<std::pair<Win, std::uint64_t>> rows;
  std::uint64_t total = 0;

  std::uint64_t count(const Win& w) const {
    for (const auto& [x, c] : rows) {
      if (x == w) return c;
    }
    return 0;
  }
};

inline StideTable stide_fit(const bpad::EventLog& log, std::size_t k, bool with_attrs) {
  StideTable table;
  for (const auto& t : log.traces()) {
    for (const auto& w : windows(t, k, with_attrs)) {
      bool found = false;
      for (auto& [x, c] : table.rows) {
        if (x == w) {
          ++c;
          found = true;
          break;
        }
      }
      if (!found) table.rows.emplace_back(w, 1);
      ++table.total;
    }
  }
  return table;
}

inline double stide_trace_score(const StideTable& table, const bpad::Trace& t, std::size_t k, bool with_attrs) {
  double best = 0.0;
  for (const auto& w : windows(t, k, with_attrs)) {
    double c = static_cast<double>(table.count(w));
    if (c < 0.5) c = 0.5;
    best = std::max(best, -std::log(c / static_cast<double>(table.total)));
  }
  return best;
}

inline bpad::Window to_window(const Win& w) {
  bpad::Window out;
  for (const auto& t : w) out.push_back(bpad::EventToken{t.end, t.vals});
  return out;
}

// ---------------------------------------------------------------------------
// Path enumeration by plain recursion over an adjacency matrix.

inline void dfs_paths(const std::vector<std::vector<bool>>& adj, std::size_t node, std::size_t end,
                      std::vector<std::size_t>& stack, std::vector<std::vector<std::size_t>>& out) {
  if (node == end) {
    out.push_back(stack);
    return;
  }
  for (std::size_t next = 0; next < adj.size(); ++next) {
    if (!adj[node][next]) continue;
    if (next != end) stack.push_back(next);
    dfs_paths(adj, next, end, stack, out);
    if (next != end) stack.pop_back();
  }
}

/// All START -> END paths as activity-index sequences, lexicographic by node id.
inline std::vector<std::vector<std::size_t>> all_paths(const bpad::ProcessGraph& g) {
  const std::size_t n = g.node_count();
  std::vector<std::vector<bool>> adj(n, std::vector<bool>(n, false));
  for (auto [a, b] : g.edges) adj[a][b] = true;
  std::vector<std::vector<std::size_t>> node_paths;
  std::vector<std::size_t> stack;
  dfs_paths(adj, g.start_node(), g.end_node(), stack, node_paths);
  std::sort(node_paths.begin(), node_paths.end());
  for (auto& p : node_paths) {
    for (auto& x : p) x -= 1;
  }
  return node_paths;
}

// ---------------------------------------------------------------------------
// Confusion counts and F1 from scratch.

struct Binary {
  double f1_pos = 0, f1_neg = 0;
};

inline double f1_of(double tp, double fp, double fn) {
  const double p = tp + fp > 0 ? tp / (tp + fp) : 0.0;
  const double r = tp + fn > 0 ? tp / (tp + fn) : 0.0;
  return p + r > 0 ? 2 * p * r / (p + r) : 0.0;
}

inline Binary binary_f1(const std::vector<bool>& pred, const std::vector<bool>& truth) {
  double tp = 0, fp = 0, fn = 0, tn = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] && truth[i]) tp += 1;
    if (pred[i] && !truth[i]) fp += 1;
    if (!pred[i] && truth[i]) fn += 1;
    if (!pred[i] && !truth[i]) tn += 1;
  }
  return Binary{f1_of(tp, fp, fn), f1_of(tn, fn, fp)};
}

// ---------------------------------------------------------------------------
// Random network with non-zero biases: zero biases put rows whose hidden units
// are all inactive exactly on the rectifier kink, where differences are
// meaningless.

inline bpad::Network random_network(const std::vector<std::size_t>& sizes, bpad::Rng& rng) {
  auto net = bpad::Network::glorot(sizes, rng);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (auto& layer : net.layers) {
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias[i] = u(rng);
  }
  return net;
}

// ---------------------------------------------------------------------------
// Finite-difference gradient check. Returns the worst relative error over
// all parameter blocks: |a - n| / max(|a|, |n|, 1e-7) elementwise is too
// sensitive near zero, so a block-wise norm ratio is used.

inline double loss_at(const bpad::Network& net, const bpad::Matrix& x, const bpad::Matrix& y,
                      const bpad::Regularization& reg, std::uint64_t seed) {
  bpad::Rng rng(seed);
  return bpad::mse_loss(bpad::forward(net, x, bpad::Mode::Train, reg, rng).output, y);
}

inline double gradient_check(const bpad::Network& net0, const bpad::Matrix& x, const bpad::Matrix& y,
                             const bpad::Regularization& reg, std::uint64_t seed, double h = 1e-6) {
  bpad::Rng rng(seed);
  const auto cache = bpad::forward(net0, x, bpad::Mode::Train, reg, rng);
  const auto g = bpad::backward(net0, cache, y);
  double worst = 0.0;
  auto check_block = [&](auto get_param, auto get_grad, std::size_t count) {
    double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
      bpad::Network plus = net0, minus = net0;
      get_param(plus, i) += h;
      get_param(minus, i) -= h;
      const double numeric = (loss_at(plus, x, y, reg, seed) - loss_at(minus, x, y, reg, seed)) / (2 * h);
      const double analytic = get_grad(i);
      diff2 += (analytic - numeric) * (analytic - numeric);
      a2 += analytic * analytic;
      n2 += numeric * numeric;
    }
    const double denom = std::sqrt(a2) + std::sqrt(n2);
    worst = std::max(worst, denom > 0 ? std::sqrt(diff2) / denom : 0.0);
  };
  for (std::size_t l = 0; l < net0.layers.size(); ++l) {
    check_block([l](bpad::Network& n, std::size_t i) -> double& { return n.layers[l].weights.data()[i]; },
                [&, l](std::size_t i) { return g.weights[l].data()[i]; },
                static_cast<std::size_t>(net0.layers[l].weights.size()));
    check_block([l](bpad::Network& n, std::size_t i) -> double& { return n.layers[l].bias.data()[i]; },
                [&, l](std::size_t i) { return g.bias[l].data()[i]; },
                static_cast<std::size_t>(net0.layers[l].bias.size()));
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Injection postconditions. Returns an empty string when every check holds,
// otherwise a description of the first violation.

inline std::string check_injection(const bpad::EventLog& before, const bpad::InjectResult& res,
                                   const bpad::ProcessModel* model, double noise, std::size_t capacity) {
  using bpad::AnomalyType;
  const auto& after = res.log;
  if (after.size() != before.size()) return "trace count changed";
  if (res.labels.traces.size() != before.size()) return "label count differs from trace count";
  const auto expected = static_cast<std::size_t>(std::floor(noise * static_cast<double>(before.size()) + 1e-9));
  std::size_t anomalous = 0;
  const auto user = after.attribute_index("user");

  for (std::size_t t = 0; t < before.size(); ++t) {
    const auto& a = before.trace(t);
    const auto& b = after.trace(t);
    const auto& lab = res.labels.traces[t];
    const std::string where = "trace " + a.case_id + ": ";
    if (a.case_id != b.case_id || lab.case_id != a.case_id) return where + "case id mismatch";
    if (lab.slots.size() != b.events.size()) return where + "label rows differ from trace length";

    // Cross-resolution consistency, recomputed here.
    std::vector<std::pair<std::size_t, std::size_t>> marked;
    for (std::size_t e = 0; e < lab.slots.size(); ++e) {
      if (lab.slots[e].size() != 1 + after.attribute_names().size()) return where + "slot row width";
      for (std::size_t s = 0; s < lab.slots[e].size(); ++s) {
        if (lab.slots[e][s]) marked.emplace_back(e, s);
      }
    }
    if (lab.is_anomalous() != !marked.empty()) return where + "trace verdict disagrees with slot labels";
    if (b.events.size() > capacity) return where + "exceeds capacity";

    if (!lab.is_anomalous()) {
      if (!(a == b)) return where + "unselected trace was modified";
      continue;
    }
    ++anomalous;
    const auto& rec = *lab.anomaly;
    std::vector<std::pair<std::size_t, std::size_t>> rec_slots;
    for (const auto& s : rec.slots) rec_slots.emplace_back(s.event, s.slot);
    std::sort(rec_slots.begin(), rec_slots.end());
    if (rec_slots != marked) return where + "record slots differ from label matrix";

    const std::size_t la = a.events.size(), lb = b.events.size();
    switch (rec.type) {
      case AnomalyType::Skip: {
        if (lb + 1 != la) return where + "skip must shorten by one";
        if (marked.size() != 1 || marked[0].second != 0) return where + "skip labels one activity slot";
        bool ok = false;
        for (std::size_t i = 0; i < la && !ok; ++i) {
          auto copy = a.events;
          copy.erase(copy.begin() + static_cast<std::ptrdiff_t>(i));
          ok = copy == b.events && marked[0].first == std::min(i, lb - 1);
        }
        if (!ok) return where + "skip is not a single removal at the labeled position";
        break;
      }
      case AnomalyType::Switch: {
        if (lb != la) return where + "switch changes length";
        if (marked.size() != 2 || marked[0].second != 0 || marked[1].second != 0 ||
            marked[1].first != marked[0].first + 1) {
          return where + "switch labels two adjacent activity slots";
        }
        const std::size_t p = marked[0].first;
        if (a.events[p].activity == a.events[p + 1].activity) return where + "switched identical activities";
        for (std::size_t i = 0; i < la; ++i) {
          const std::size_t src = i == p ? p + 1 : i == p + 1 ? p : i;
          if (b.events[i].activity != a.events[src].activity || b.events[i].attributes != a.events[src].attributes ||
              b.events[i].timestamp != a.events[i].timestamp) {
            return where + "switch is not an adjacent swap";
          }
        }
        break;
      }
      case AnomalyType::Rework: {
        if (lb != la + 1) return where + "rework must lengthen by one";
        if (marked.size() != 1 || marked[0].second != 0 || marked[0].first == 0) return where + "rework label";
        const std::size_t q = marked[0].first;
        if (!(b.events[q] == b.events[q - 1])) return where + "rework event is not a repeat";
        auto copy = b.events;
        copy.erase(copy.begin() + static_cast<std::ptrdiff_t>(q));
        if (copy != a.events) return where + "rework is not a single insertion";
        break;
      }
      case AnomalyType::IncorrectUser:
      case AnomalyType::IncorrectLtd: {
        if (!model || !user) return where + "user anomaly without model";
        if (lb != la) return where + "user anomaly changes length";
        if (marked.size() != 1 || marked[0].second != 1 + *user) return where + "user anomaly labels the user slot";
        const std::size_t p = marked[0].first;
        for (std::size_t i = 0; i < la; ++i) {
          if (b.events[i].activity != a.events[i].activity || b.events[i].timestamp != a.events[i].timestamp) {
            return where + "user anomaly touched an activity";
          }
          if (i != p && b.events[i].attributes != a.events[i].attributes) return where + "other user changed";
        }
        const auto act = *model->activity_index(b.events[p].activity);
        const auto& allowed = model->permitted[act];
        const auto u = model->user_index(b.events[p].attributes[*user]);
        if (!u) return where + "unknown user";
        const bool permitted = std::find(allowed.begin(), allowed.end(), *u) != allowed.end();
        if (rec.type == AnomalyType::IncorrectUser) {
          if (permitted) return where + "incorrect_user picked a permitted user";
        } else {
          std::vector<std::string> acts;
          for (const auto& e : a.events) acts.push_back(e.activity);
          const auto v = model->find_variant(acts);
          if (!v || !model->variants[*v].ltd) return where + "incorrect_ltd on a variant without dependency";
          const auto ltd = *model->variants[*v].ltd;
          if (p != ltd.second) return where + "incorrect_ltd not on the dependent event";
          if (!permitted) return where + "incorrect_ltd picked a non-permitted user";
          if (b.events[p].attributes[*user] == b.events[ltd.first].attributes[*user]) {
            return where + "incorrect_ltd kept the dependency";
          }
        }
        break;
      }
    }
  }
  if (anomalous != expected) {
    return "expected " + std::to_string(expected) + " anomalous traces, got " + std::to_string(anomalous);
  }
  return {};
}

/// Sampled traces respect permissions and dependencies.
inline std::string check_clean_log(const bpad::EventLog& log, const bpad::ProcessModel& model) {
  const auto user = log.attribute_index("user");
  for (const auto& t : log.traces()) {
    std::vector<std::string> acts;
    for (const auto& e : t.events) acts.push_back(e.activity);
    const auto v = model.find_variant(acts);
    if (!v) return "trace " + t.case_id + " is not a variant";
    if (!user) continue;
    for (const auto& e : t.events) {
      const auto a = *model.activity_index(e.activity);
      const auto u = model.user_index(e.attributes[*user]);
      if (!u || std::find(model.permitted[a].begin(), model.permitted[a].end(), *u) == model.permitted[a].end()) {
        return "trace " + t.case_id + " uses a non-permitted user";
      }
    }
    if (const auto& ltd = model.variants[*v].ltd) {
      if (t.events[ltd->first].attributes[*user] != t.events[ltd->second].attributes[*user]) {
        return "trace " + t.case_id + " breaks its dependency";
      }
    }
  }
  return {};
}

}  // namespace oracle
