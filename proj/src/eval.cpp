#include "bpad/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>

#include "bpad/error.hpp"
#include "bpad/util.hpp"
#include "json.hpp"

namespace bpad {

namespace {

using ojson = nlohmann::ordered_json;

ClassMetrics class_metrics(std::size_t tp, std::size_t fp, std::size_t fn) {
  ClassMetrics m;
  m.support = tp + fn;
  m.precision = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
  m.recall = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
  m.f1 = 2 * tp + fp + fn == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
  return m;
}

void tally(Confusion& c, bool predicted, bool actual) {
  if (predicted && actual) ++c.tp;
  else if (predicted) ++c.fp;
  else if (actual) ++c.fn;
  else ++c.tn;
}

double pick_best(std::vector<std::pair<double, double>>& curve) {
  double best_alpha = curve.front().first;
  double best = curve.front().second;
  for (const auto& [a, f] : curve) {
    if (f > best) {
      best = f;
      best_alpha = a;
    }
  }
  return best_alpha;
}

ojson metric_json(const MetricRow& m) {
  auto cls = [](const ClassMetrics& c) {
    return ojson{{"precision", c.precision}, {"recall", c.recall}, {"f1", c.f1}, {"support", c.support}};
  };
  return ojson{{"resolution", std::string(to_string(m.resolution))},
               {"normal", cls(m.normal)},
               {"anomaly", cls(m.anomaly)},
               {"f1_macro", m.f1_macro}};
}

MetricRow metric_from_json(const ojson& j) {
  auto cls = [](const ojson& c) {
    return ClassMetrics{c.at("precision"), c.at("recall"), c.at("f1"), c.at("support")};
  };
  MetricRow m;
  const std::string r = j.at("resolution");
  m.resolution = r == "trace" ? Resolution::Trace : r == "event" ? Resolution::Event : Resolution::Attribute;
  m.normal = cls(j.at("normal"));
  m.anomaly = cls(j.at("anomaly"));
  m.f1_macro = j.at("f1_macro");
  return m;
}

std::pair<double, double> mean_std(const std::vector<double>& xs) {
  if (xs.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(xs.size() - 1))};
}

std::string cell_name(const std::string& model, double noise, std::uint64_t seed) {
  return model + "_n" + format_double(noise) + "_s" + std::to_string(seed) + ".json";
}

}  // namespace

MetricRow metrics_from_confusion(Resolution resolution, const Confusion& c) {
  MetricRow row;
  row.resolution = resolution;
  row.anomaly = class_metrics(c.tp, c.fp, c.fn);
  row.normal = class_metrics(c.tn, c.fn, c.fp);
  row.f1_macro = (row.normal.f1 + row.anomaly.f1) / 2.0;
  return row;
}

std::vector<MetricRow> score_to_metrics(const ScoreReport& report, const LabelSet& labels) {
  if (report.traces.size() != labels.traces.size()) {
    throw DataError("report covers " + std::to_string(report.traces.size()) + " traces, labels cover " +
                    std::to_string(labels.traces.size()));
  }
  Confusion trace, event, attr;
  for (std::size_t i = 0; i < report.traces.size(); ++i) {
    const auto& r = report.traces[i];
    const auto& l = labels.traces[i];
    if (r.case_id != l.case_id) throw DataError("report/label case id mismatch at row " + std::to_string(i));
    if (r.events.size() != l.slots.size()) throw DataError("report/label length mismatch for '" + r.case_id + "'");
    tally(trace, r.anomalous, l.is_anomalous());
    for (std::size_t e = 0; e < l.slots.size(); ++e) {
      tally(event, r.event_verdicts[e], l.event_anomalous(e));
      if (r.slot_verdicts[e].size() != l.slots[e].size()) throw DataError("report/label slot count mismatch");
      for (std::size_t s = 0; s < l.slots[e].size(); ++s) tally(attr, r.slot_verdicts[e][s], l.slots[e][s]);
    }
  }
  return {metrics_from_confusion(Resolution::Trace, trace), metrics_from_confusion(Resolution::Event, event),
          metrics_from_confusion(Resolution::Attribute, attr)};
}

std::vector<double> default_alpha_grid() {
  std::vector<double> grid;
  for (int i = 0; i <= 12; ++i) grid.push_back(1.0 + 0.25 * i);
  return grid;
}

AlphaSearch grid_search_alpha(std::span<const LabeledReport> logs, std::span<const double> candidates) {
  if (candidates.empty()) throw ConfigError("alpha grid is empty");
  if (logs.empty()) throw ConfigError("alpha grid search needs at least one labeled log");
  AlphaSearch out;
  for (double a : candidates) {
    double sum = 0.0;
    for (const auto& l : logs) {
      const auto rows = score_to_metrics(apply_threshold(l.report, l.report.threshold.with_alpha(a)), l.labels);
      sum += rows[0].f1_macro;
    }
    out.curve.emplace_back(a, sum / static_cast<double>(logs.size()));
  }
  out.best_alpha = pick_best(out.curve);
  return out;
}

// ---------------------------------------------------------------------------

ProcessModel model_for(const std::string& name, std::uint64_t graph_seed, std::uint64_t seed) {
  if (name == "p2p") return builtin_p2p();
  GenConfig cfg = profile_config(name);
  cfg.seed = derive_seed(graph_seed, "graph/" + name);
  return assign_users(generate_model(cfg), cfg.n_users, cfg.max_users_per_activity, derive_seed(seed, "users"));
}

Dataset build_dataset(const DatasetSpec& spec) {
  auto model = with_random_variant_probs(model_for(spec.model, spec.graph_seed, spec.seed), 1.0, 0.2,
                                         derive_seed(spec.seed, "variant-probs"));
  const std::size_t capacity = model.max_variant_length() + 1;
  const auto clean_train = sample_log(model, spec.train_size, derive_seed(spec.seed, "sample/train"));
  const auto clean_test = sample_log(model, spec.test_size, derive_seed(spec.seed, "sample/test"));
  InjectConfig ic;
  ic.enabled_types = spec.types;
  ic.max_trace_len = capacity;
  ic.noise_level = spec.train_noise;
  ic.seed = derive_seed(spec.seed, "inject/train");
  auto train = inject(clean_train, &model, ic);
  ic.noise_level = spec.test_noise;
  ic.seed = derive_seed(spec.seed, "inject/test");
  auto test = inject(clean_test, &model, ic);
  return Dataset{std::move(model), std::move(train.log), std::move(train.labels), std::move(test.log),
                 std::move(test.labels), capacity};
}

DetectorRun run_detector(const std::string& detector, const Dataset& data, const DetectorSettings& settings) {
  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  DetectorRun run;
  if (detector == "dae") {
    LayoutOptions lo;
    lo.max_len = data.capacity;
    lo.unknown_column = settings.unknown_column;
    const auto layout = build_layout(data.train_log, lo);
    const auto model = train(encode(data.train_log, layout), layout, settings.train);
    run.train_seconds = std::chrono::duration<double>(clock::now() - start).count();
    run.report = dae_score(model, data.test_log, 1.0);
  } else if (detector == "tstide" || detector == "tstide+") {
    const auto kind = detector == "tstide" ? WindowKind::Activity : WindowKind::ActivityAttributes;
    const auto wm = tstide_fit(data.train_log, settings.k, kind);
    run.train_seconds = std::chrono::duration<double>(clock::now() - start).count();
    run.report = tstide_score(wm, data.test_log, 1.0);
  } else if (detector == "random") {
    run.report = random_baseline(data.test_log, settings.random_p, derive_seed(settings.train.seed, "random"));
  } else {
    throw ConfigError("unknown detector '" + detector + "' (expected dae|tstide|tstide+|random)");
  }
  return run;
}

void ExperimentSpec::validate() const {
  if (models.empty() || noise_levels.empty() || seeds.empty() || detectors.empty()) {
    throw ConfigError("sweep needs at least one model, noise level, seed and detector");
  }
  if (alpha_grid.empty()) throw ConfigError("sweep alpha grid is empty");
  for (const auto& d : detectors) {
    if (d != "dae" && d != "tstide" && d != "tstide+" && d != "random") {
      throw ConfigError("unknown detector '" + d + "'");
    }
  }
}

SweepResult run_sweep(const ExperimentSpec& spec) {
  spec.validate();
  const bool on_disk = !spec.out_dir.empty();
  const auto cell_dir = spec.out_dir / "cells";
  SweepResult result;

  struct Cell {
    std::string model;
    double noise;
    std::uint64_t seed;
    ojson data;
  };
  std::vector<Cell> cells;

  for (const auto& model : spec.models) {
    for (double noise : spec.noise_levels) {
      for (auto seed : spec.seeds) {
        Cell cell{model, noise, seed, {}};
        const auto path = cell_dir / cell_name(model, noise, seed);
        if (on_disk && std::filesystem::exists(path)) {
          cell.data = ojson::parse(read_file(path));
          cells.push_back(std::move(cell));
          continue;
        }
        try {
          DatasetSpec ds;
          ds.model = model;
          ds.train_noise = noise;
          ds.test_noise = spec.test_noise.value_or(noise);
          ds.train_size = spec.train_size;
          ds.test_size = spec.test_size;
          ds.types = spec.types;
          ds.graph_seed = spec.graph_seed;
          ds.seed = seed;
          const auto data = build_dataset(ds);
          DetectorSettings settings = spec.settings;
          settings.train.seed = derive_seed(seed, "train");
          ojson dets = ojson::object();
          for (const auto& det : spec.detectors) {
            log::info("cell " + model + " noise " + format_double(noise) + " seed " + std::to_string(seed) + ": " +
                      det);
            const auto run = run_detector(det, data, settings);
            ojson by_alpha = ojson::array();
            const std::vector<double> alphas = det == "random" ? std::vector<double>{1.0} : spec.alpha_grid;
            for (double a : alphas) {
              const auto rows =
                  score_to_metrics(apply_threshold(run.report, run.report.threshold.with_alpha(a)), data.test_labels);
              ojson jr = ojson::array();
              for (const auto& r : rows) jr.push_back(metric_json(r));
              by_alpha.push_back({{"alpha", a}, {"metrics", std::move(jr)}});
            }
            dets[det] = {{"train_seconds", spec.record_timing ? ojson(run.train_seconds) : ojson(nullptr)},
                         {"by_alpha", std::move(by_alpha)}};
          }
          cell.data = {{"model", model}, {"noise", noise}, {"seed", seed}, {"detectors", std::move(dets)}};
          if (on_disk) atomic_write(path, cell.data.dump() + "\n");
          cells.push_back(std::move(cell));
        } catch (const std::exception& e) {
          result.failures.push_back(model + "," + format_double(noise) + "," + std::to_string(seed) + "," + e.what());
          log::warn("sweep cell failed: " + result.failures.back());
        }
      }
    }
  }

  // One alpha per detector: maximize the mean trace-level macro F1 over cells.
  for (const auto& det : spec.detectors) {
    std::map<double, std::pair<double, std::size_t>> acc;
    for (const auto& cell : cells) {
      if (!cell.data.at("detectors").contains(det)) continue;
      for (const auto& ja : cell.data.at("detectors").at(det).at("by_alpha")) {
        auto& [sum, n] = acc[ja.at("alpha").get<double>()];
        sum += metric_from_json(ja.at("metrics").at(0)).f1_macro;
        ++n;
      }
    }
    if (acc.empty()) continue;
    std::vector<std::pair<double, double>> curve;
    const std::vector<double> order = det == "random" ? std::vector<double>{1.0} : spec.alpha_grid;
    for (double a : order) {
      auto it = acc.find(a);
      if (it != acc.end()) curve.emplace_back(a, it->second.first / static_cast<double>(it->second.second));
    }
    result.alpha[det] = pick_best(curve);
  }

  for (const auto& cell : cells) {
    for (const auto& det : spec.detectors) {
      if (!cell.data.at("detectors").contains(det) || !result.alpha.count(det)) continue;
      const auto& jd = cell.data.at("detectors").at(det);
      for (const auto& ja : jd.at("by_alpha")) {
        if (ja.at("alpha").get<double>() != result.alpha[det]) continue;
        for (const auto& jm : ja.at("metrics")) {
          ResultRow row{cell.model, cell.noise, cell.seed, det, result.alpha[det], metric_from_json(jm), std::nullopt};
          if (!jd.at("train_seconds").is_null()) row.train_seconds = jd.at("train_seconds").get<double>();
          result.rows.push_back(std::move(row));
        }
      }
    }
  }

  // Summary: per (model, noise) over seeds, plus an "all" group over every cell.
  auto summarize = [&](const std::string& model, const std::string& noise, const std::string& det, Resolution res,
                       auto pred) {
    std::vector<double> macro, normal, anomaly;
    for (const auto& r : result.rows) {
      if (r.detector != det || r.metrics.resolution != res || !pred(r)) continue;
      macro.push_back(r.metrics.f1_macro);
      normal.push_back(r.metrics.normal.f1);
      anomaly.push_back(r.metrics.anomaly.f1);
    }
    if (macro.empty()) return;
    SummaryRow s;
    s.model = model;
    s.noise = noise;
    s.detector = det;
    s.alpha = result.alpha[det];
    s.resolution = res;
    s.n = macro.size();
    std::tie(s.f1_macro_mean, s.f1_macro_std) = mean_std(macro);
    std::tie(s.f1_normal_mean, s.f1_normal_std) = mean_std(normal);
    std::tie(s.f1_anomaly_mean, s.f1_anomaly_std) = mean_std(anomaly);
    result.summary.push_back(std::move(s));
  };
  for (const auto& model : spec.models) {
    for (double noise : spec.noise_levels) {
      for (const auto& det : spec.detectors) {
        for (auto res : kResolutions) {
          summarize(model, format_double(noise), det, res,
                    [&](const ResultRow& r) { return r.model == model && r.noise == noise; });
        }
      }
    }
  }
  for (const auto& det : spec.detectors) {
    for (auto res : kResolutions) summarize("all", "all", det, res, [](const ResultRow&) { return true; });
  }

  if (on_disk) {
    atomic_write(spec.out_dir / "results.csv", results_csv(result.rows));
    atomic_write(spec.out_dir / "summary.csv", summary_csv(result.summary));
    atomic_write(spec.out_dir / "summary.md", summary_markdown(result.summary));
    ojson meta;
    meta["schema_version"] = 1;
    meta["alpha"] = result.alpha;
    meta["cells"] = cells.size();
    meta["failures"] = result.failures;
    atomic_write(spec.out_dir / "sweep.json", meta.dump(2) + "\n");
  }
  return result;
}

std::string results_csv(const std::vector<ResultRow>& rows) {
  std::string out =
      "model,noise,seed,detector,alpha,resolution,f1_macro,f1_normal,f1_anomaly,precision_normal,"
      "precision_anomaly,recall_normal,recall_anomaly,support_normal,support_anomaly,train_seconds\n";
  for (const auto& r : rows) {
    const auto& m = r.metrics;
    out += r.model + "," + format_double(r.noise) + "," + std::to_string(r.seed) + "," + r.detector + "," +
           format_double(r.alpha) + "," + std::string(to_string(m.resolution)) + "," + format_double(m.f1_macro) +
           "," + format_double(m.normal.f1) + "," + format_double(m.anomaly.f1) + "," +
           format_double(m.normal.precision) + "," + format_double(m.anomaly.precision) + "," +
           format_double(m.normal.recall) + "," + format_double(m.anomaly.recall) + "," +
           std::to_string(m.normal.support) + "," + std::to_string(m.anomaly.support) + "," +
           (r.train_seconds ? format_double(*r.train_seconds) : std::string()) + "\n";
  }
  return out;
}

std::string summary_csv(const std::vector<SummaryRow>& rows) {
  std::string out =
      "model,noise,detector,alpha,resolution,n,f1_macro_mean,f1_macro_std,f1_normal_mean,f1_normal_std,"
      "f1_anomaly_mean,f1_anomaly_std\n";
  for (const auto& s : rows) {
    out += s.model + "," + s.noise + "," + s.detector + "," + format_double(s.alpha) + "," +
           std::string(to_string(s.resolution)) + "," + std::to_string(s.n) + "," + format_double(s.f1_macro_mean) +
           "," + format_double(s.f1_macro_std) + "," + format_double(s.f1_normal_mean) + "," +
           format_double(s.f1_normal_std) + "," + format_double(s.f1_anomaly_mean) + "," +
           format_double(s.f1_anomaly_std) + "\n";
  }
  return out;
}

std::string summary_markdown(const std::vector<SummaryRow>& rows) {
  auto pm = [](double mean, double sd) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f ± %.2f", mean, sd);
    return std::string(buf);
  };
  std::string out =
      "Values are mean ± sample std over seeds.\n\n"
      "| Model | Noise | Resolution | Detector | alpha | Macro F1 | Normal F1 | Anomaly F1 | n |\n"
      "|---|---|---|---|---|---|---|---|---|\n";
  for (const auto& s : rows) {
    out += "| " + s.model + " | " + s.noise + " | " + std::string(to_string(s.resolution)) + " | " + s.detector +
           " | " + format_double(s.alpha) + " | " + pm(s.f1_macro_mean, s.f1_macro_std) + " | " +
           pm(s.f1_normal_mean, s.f1_normal_std) + " | " + pm(s.f1_anomaly_mean, s.f1_anomaly_std) + " | " +
           std::to_string(s.n) + " |\n";
  }
  return out;
}

std::string metrics_csv(const std::string& detector, const std::vector<MetricRow>& rows) {
  std::string out =
      "detector,resolution,f1_macro,f1_normal,f1_anomaly,precision_normal,precision_anomaly,recall_normal,"
      "recall_anomaly,support_normal,support_anomaly\n";
  for (const auto& m : rows) {
    out += detector + "," + std::string(to_string(m.resolution)) + "," + format_double(m.f1_macro) + "," +
           format_double(m.normal.f1) + "," + format_double(m.anomaly.f1) + "," + format_double(m.normal.precision) +
           "," + format_double(m.anomaly.precision) + "," + format_double(m.normal.recall) + "," +
           format_double(m.anomaly.recall) + "," + std::to_string(m.normal.support) + "," +
           std::to_string(m.anomaly.support) + "\n";
  }
  return out;
}

}  // namespace bpad
