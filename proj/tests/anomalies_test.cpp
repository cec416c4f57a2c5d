#include <doctest.h>

#include <map>

#include "bpad/anomalies.hpp"
#include "bpad/error.hpp"
#include "oracles.hpp"

using namespace bpad;

namespace {

struct Fixture {
  ProcessModel model;
  EventLog log;
  std::size_t capacity;
};

Fixture p2p_fixture(std::size_t n, std::uint64_t seed) {
  auto m = with_random_variant_probs(builtin_p2p(), 1.0, 0.2, seed);
  auto log = sample_log(m, n, seed + 1);
  const auto cap = m.max_variant_length() + 1;
  return Fixture{std::move(m), std::move(log), cap};
}

}  // namespace

TEST_CASE("injection postconditions hold across noise levels and seeds") {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const auto f = p2p_fixture(50, seed);
    for (double noise : {0.0, 0.1, 0.37, 1.0}) {
      InjectConfig cfg;
      cfg.noise_level = noise;
      cfg.seed = seed;
      cfg.max_trace_len = f.capacity;
      const auto res = inject(f.log, &f.model, cfg);
      CAPTURE(seed);
      CAPTURE(noise);
      CHECK(oracle::check_injection(f.log, res, &f.model, noise, f.capacity) == "");
      CHECK_NOTHROW(check_label_consistency(res.labels));
      CHECK(res.labels.max_len == f.capacity);
      CHECK(res.records.size() == res.labels.anomaly_count());
    }
  }
}

TEST_CASE("anomaly types are drawn uniformly among applicable ones") {
  // Every P2P trace admits all five types, so each should get about 1/5.
  const auto f = p2p_fixture(5000, 3);
  InjectConfig cfg;
  cfg.noise_level = 1.0;
  cfg.seed = 8;
  cfg.max_trace_len = f.capacity;
  const auto res = inject(f.log, &f.model, cfg);
  std::map<AnomalyType, double> counts;
  for (const auto& r : res.records) counts[r.type] += 1;
  double chi2 = 0.0;
  for (auto t : kAllAnomalyTypes) chi2 += (counts[t] - 1000.0) * (counts[t] - 1000.0) / 1000.0;
  // 4 degrees of freedom, 0.999 quantile 18.47.
  CHECK(chi2 < 18.47);
}

TEST_CASE("anomaly count is floor(noise * n)") {
  const auto f = p2p_fixture(7, 1);
  InjectConfig cfg;
  cfg.max_trace_len = f.capacity;
  for (auto [noise, expected] : std::vector<std::pair<double, std::size_t>>{{0.1, 0}, {0.3, 2}, {0.5, 3}, {1.0, 7}}) {
    cfg.noise_level = noise;
    CHECK(inject(f.log, &f.model, cfg).labels.anomaly_count() == expected);
  }
}

TEST_CASE("injection is deterministic and seed dependent") {
  const auto f = p2p_fixture(200, 2);
  InjectConfig cfg;
  cfg.noise_level = 0.5;
  cfg.seed = 77;
  cfg.max_trace_len = f.capacity;
  const auto a = inject(f.log, &f.model, cfg);
  const auto b = inject(f.log, &f.model, cfg);
  CHECK(a.log == b.log);
  CHECK(a.labels == b.labels);
  cfg.seed = 78;
  CHECK_FALSE(inject(f.log, &f.model, cfg).labels == a.labels);
}

TEST_CASE("rework respects the encoder capacity") {
  const EventLog log({}, {Trace{"1", {Event{"A", {}, {}}, Event{"B", {}, {}}}}});
  InjectConfig cfg;
  cfg.noise_level = 1.0;
  cfg.enabled_types = {AnomalyType::Rework};
  cfg.max_trace_len = 2;
  CHECK_THROWS_AS(inject(log, nullptr, cfg), DataError);
  cfg.max_trace_len = 3;
  const auto res = inject(log, nullptr, cfg);
  CHECK(res.log.trace(0).size() == 3);
  CHECK(oracle::check_injection(log, res, nullptr, 1.0, 3) == "");
}

TEST_CASE("user anomalies need a model and a user attribute") {
  const EventLog log({}, {Trace{"1", {Event{"A", {}, {}}, Event{"B", {}, {}}}}});
  InjectConfig cfg;
  cfg.noise_level = 1.0;
  CHECK_THROWS_AS(inject(log, nullptr, cfg), ConfigError);
  cfg.enabled_types = {AnomalyType::Skip, AnomalyType::Switch};
  CHECK_NOTHROW(inject(log, nullptr, cfg));
  cfg.noise_level = 1.5;
  CHECK_THROWS_AS(inject(log, nullptr, cfg), ConfigError);
}

TEST_CASE("applicable types follow trace shape") {
  const Trace single{"s", {Event{"A", {}, {"u"}}}};
  const auto types = applicable_types(single, 0, nullptr, {kAllAnomalyTypes[0], kAllAnomalyTypes[1],
                                                           kAllAnomalyTypes[2], kAllAnomalyTypes[3],
                                                           kAllAnomalyTypes[4]},
                                      5);
  CHECK(types == std::vector<AnomalyType>{AnomalyType::Rework});
}
