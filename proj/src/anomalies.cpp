#include "bpad/anomalies.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>

#include "bpad/error.hpp"
#include "bpad/util.hpp"

namespace bpad {

namespace {

constexpr std::size_t kNoAttr = static_cast<std::size_t>(-1);

std::size_t uniform_index(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

std::vector<std::size_t> complement(const std::vector<std::size_t>& permitted, std::size_t pool) {
  std::vector<std::size_t> out;
  for (std::size_t u = 0; u < pool; ++u) {
    if (!std::binary_search(permitted.begin(), permitted.end(), u)) out.push_back(u);
  }
  return out;
}

std::vector<std::size_t> switch_positions(const Trace& trace) {
  std::vector<std::size_t> out;
  for (std::size_t p = 0; p + 1 < trace.size(); ++p) {
    if (trace.events[p].activity != trace.events[p + 1].activity) out.push_back(p);
  }
  return out;
}

// Events whose activity admits at least one non-permitted user.
std::vector<std::size_t> incorrect_user_positions(const Trace& trace, const ProcessModel& model) {
  std::vector<std::size_t> out;
  for (std::size_t p = 0; p < trace.size(); ++p) {
    auto a = model.activity_index(trace.events[p].activity);
    if (a && model.permitted[*a].size() < model.users.size()) out.push_back(p);
  }
  return out;
}

struct LtdTarget {
  std::size_t position;
  std::vector<std::size_t> candidates;
};

std::optional<LtdTarget> ltd_target(const Trace& trace, std::size_t user_attr, const ProcessModel& model) {
  std::vector<std::string> acts;
  acts.reserve(trace.size());
  for (const auto& e : trace.events) acts.push_back(e.activity);
  auto v = model.find_variant(acts);
  if (!v || !model.variants[*v].ltd) return std::nullopt;
  const auto& variant = model.variants[*v];
  const auto [i, j] = *variant.ltd;
  const auto source_user = model.user_index(trace.events[i].attributes[user_attr]);
  LtdTarget target{j, {}};
  for (auto u : model.permitted[variant.activities[j]]) {
    if (!source_user || u != *source_user) target.candidates.push_back(u);
  }
  if (target.candidates.empty()) return std::nullopt;
  return target;
}

void set_slot(TraceLabels& labels, std::size_t event, std::size_t slot) {
  labels.slots.at(event).at(slot) = true;
  labels.anomaly->slots.push_back(SlotRef{event, slot});
  labels.anomaly->positions.push_back(event);
}

}  // namespace

void InjectConfig::validate() const {
  if (!(noise_level >= 0.0 && noise_level <= 1.0)) throw ConfigError("inject.noise must lie in [0, 1]");
  if (enabled_types.empty()) throw ConfigError("inject.types must not be empty");
}

bool needs_model(AnomalyType type) {
  return type == AnomalyType::IncorrectUser || type == AnomalyType::IncorrectLtd;
}

std::vector<AnomalyType> applicable_types(const Trace& trace, std::size_t user_attr, const ProcessModel* model,
                                          const std::vector<AnomalyType>& enabled, std::size_t max_trace_len) {
  std::vector<AnomalyType> out;
  for (auto type : enabled) {
    bool ok = false;
    switch (type) {
      case AnomalyType::Skip: ok = trace.size() >= 2; break;
      case AnomalyType::Switch: ok = !switch_positions(trace).empty(); break;
      case AnomalyType::Rework: ok = max_trace_len == 0 || trace.size() < max_trace_len; break;
      case AnomalyType::IncorrectUser:
        ok = model && user_attr != kNoAttr && !incorrect_user_positions(trace, *model).empty();
        break;
      case AnomalyType::IncorrectLtd:
        ok = model && user_attr != kNoAttr && ltd_target(trace, user_attr, *model).has_value();
        break;
    }
    if (ok) out.push_back(type);
  }
  return out;
}

InjectResult inject(const EventLog& log, const ProcessModel* model, const InjectConfig& cfg) {
  cfg.validate();
  const bool wants_model = std::any_of(cfg.enabled_types.begin(), cfg.enabled_types.end(), needs_model);
  const auto user_attr_opt = log.attribute_index(kUserAttribute);
  const std::size_t user_attr = user_attr_opt.value_or(kNoAttr);
  if (wants_model) {
    if (model == nullptr || !model->has_users()) {
      throw ConfigError("user anomalies need a process model with permitted users");
    }
    if (!user_attr_opt) throw ConfigError("user anomalies need a '" + std::string(kUserAttribute) + "' attribute");
  }
  if (cfg.max_trace_len != 0 && log.max_trace_len() > cfg.max_trace_len) {
    throw DataError("log contains traces longer than the encoder capacity " + std::to_string(cfg.max_trace_len));
  }

  const std::size_t n = log.size();
  const auto count = static_cast<std::size_t>(std::floor(cfg.noise_level * static_cast<double>(n) + 1e-9));
  if (count == 0 && cfg.noise_level > 0.0) {
    log::warn("noise level " + format_double(cfg.noise_level) + " on " + std::to_string(n) +
              " traces selects no trace; log left unchanged");
  }

  Rng rng(derive_seed(cfg.seed, "inject"));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<bool> selected(n, false);
  for (std::size_t i = 0; i < count; ++i) selected[order[i]] = true;

  const std::size_t slots_per_event = 1 + log.attribute_names().size();
  const std::size_t capacity = cfg.max_trace_len ? cfg.max_trace_len : log.max_trace_len() + 1;
  std::vector<Trace> traces;
  traces.reserve(n);
  LabelSet labels;
  labels.slots_per_event = slots_per_event;
  labels.max_len = std::max(capacity, log.max_trace_len());
  std::vector<AnomalyRecord> records;

  for (std::size_t t = 0; t < n; ++t) {
    Trace trace = log.trace(t);
    TraceLabels tl;
    tl.case_id = trace.case_id;
    if (!selected[t]) {
      tl.slots.assign(trace.size(), std::vector<bool>(slots_per_event, false));
      traces.push_back(std::move(trace));
      labels.traces.push_back(std::move(tl));
      continue;
    }
    const auto types = applicable_types(trace, user_attr, model, cfg.enabled_types, cfg.max_trace_len);
    if (types.empty()) {
      throw DataError("no enabled anomaly type applies to trace '" + trace.case_id + "'");
    }
    const AnomalyType type = types[uniform_index(rng, types.size())];
    tl.anomaly = AnomalyRecord{trace.case_id, type, {}, {}};
    auto fresh_slots = [&](std::size_t len) { tl.slots.assign(len, std::vector<bool>(slots_per_event, false)); };

    switch (type) {
      case AnomalyType::Skip: {
        const std::size_t p = uniform_index(rng, trace.size());
        trace.events.erase(trace.events.begin() + static_cast<std::ptrdiff_t>(p));
        fresh_slots(trace.size());
        set_slot(tl, std::min(p, trace.size() - 1), 0);
        break;
      }
      case AnomalyType::Switch: {
        const auto candidates = switch_positions(trace);
        const std::size_t p = candidates[uniform_index(rng, candidates.size())];
        auto& a = trace.events[p];
        auto& b = trace.events[p + 1];
        // Timestamps stay in place so the mutated order survives re-sorting.
        std::swap(a.activity, b.activity);
        std::swap(a.attributes, b.attributes);
        fresh_slots(trace.size());
        set_slot(tl, p, 0);
        set_slot(tl, p + 1, 0);
        break;
      }
      case AnomalyType::Rework: {
        const std::size_t p = uniform_index(rng, trace.size());
        Event copy = trace.events[p];
        trace.events.insert(trace.events.begin() + static_cast<std::ptrdiff_t>(p + 1), std::move(copy));
        fresh_slots(trace.size());
        set_slot(tl, p + 1, 0);
        break;
      }
      case AnomalyType::IncorrectUser: {
        const auto candidates = incorrect_user_positions(trace, *model);
        const std::size_t p = candidates[uniform_index(rng, candidates.size())];
        const auto a = *model->activity_index(trace.events[p].activity);
        const auto others = complement(model->permitted[a], model->users.size());
        trace.events[p].attributes[user_attr] = model->users[others[uniform_index(rng, others.size())]];
        fresh_slots(trace.size());
        set_slot(tl, p, 1 + user_attr);
        break;
      }
      case AnomalyType::IncorrectLtd: {
        const auto target = *ltd_target(trace, user_attr, *model);
        const auto u = target.candidates[uniform_index(rng, target.candidates.size())];
        trace.events[target.position].attributes[user_attr] = model->users[u];
        fresh_slots(trace.size());
        set_slot(tl, target.position, 1 + user_attr);
        break;
      }
    }
    records.push_back(*tl.anomaly);
    traces.push_back(std::move(trace));
    labels.traces.push_back(std::move(tl));
  }

  InjectResult result{EventLog(log.attribute_names(), std::move(traces)), std::move(labels), std::move(records)};
  result.labels.max_len = std::max(result.labels.max_len, result.log.max_trace_len());
  return result;
}

}  // namespace bpad
