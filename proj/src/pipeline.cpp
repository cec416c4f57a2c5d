#include "bpad/pipeline.hpp"

#include <algorithm>

#include "bpad/error.hpp"
#include "bpad/util.hpp"

namespace bpad {

namespace {

using ojson = nlohmann::ordered_json;
namespace fs = std::filesystem;

std::string kind_name(const ojson& j) {
  switch (j.type()) {
    case ojson::value_t::null: return "null";
    case ojson::value_t::boolean: return "boolean";
    case ojson::value_t::string: return "string";
    case ojson::value_t::array: return "array";
    case ojson::value_t::object: return "object";
    default: return "number";
  }
}

// Recursively merges `src` into `dst`; every key must already exist in `dst`.
void merge(ojson& dst, const ojson& src, const std::string& path) {
  if (!src.is_object()) throw ConfigError(path.empty() ? "config must be a JSON object" : path + ": expected object");
  for (const auto& [key, value] : src.items()) {
    const std::string p = path.empty() ? key : path + "." + key;
    if (!dst.contains(key)) throw ConfigError(p + ": unknown key");
    auto& slot = dst[key];
    if (slot.is_object()) merge(slot, value, p);
    else slot = value;
  }
}

template <typename T>
T get(const ojson& root, const std::string& path) {
  const ojson* node = &root;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const auto key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!node->is_object() || !node->contains(key)) throw ConfigError(path + ": missing key");
    node = &node->at(key);
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  try {
    if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
      if (!node->is_number_unsigned()) throw ConfigError(path + ": expected non-negative integer, got " + kind_name(*node));
    } else if constexpr (std::is_same_v<T, double>) {
      if (!node->is_number()) throw ConfigError(path + ": expected number, got " + kind_name(*node));
    } else if constexpr (std::is_same_v<T, bool>) {
      if (!node->is_boolean()) throw ConfigError(path + ": expected boolean, got " + kind_name(*node));
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!node->is_string()) throw ConfigError(path + ": expected string, got " + kind_name(*node));
    }
    return node->get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

std::vector<AnomalyType> types_from(const std::vector<std::string>& names, const std::string& path) {
  std::vector<AnomalyType> out;
  for (const auto& n : names) {
    try {
      out.push_back(parse_anomaly_type(n));
    } catch (const Error& e) {
      throw ConfigError(path + ": " + e.what());
    }
  }
  return out;
}

std::vector<std::string> type_names(const std::vector<AnomalyType>& types) {
  std::vector<std::string> out;
  for (auto t : types) out.emplace_back(to_string(t));
  return out;
}

std::string ext(LogFormat f) { return std::string(to_string(f)); }

LogFormat format_for(const fs::path& path, LogFormat fallback) {
  const auto e = path.extension().string();
  if (e == ".jsonl") return LogFormat::Jsonl;
  if (e == ".csv") return LogFormat::Csv;
  if (e == ".xes") return LogFormat::Xes;
  return fallback;
}

void echo_config(const PipelineConfig& cfg, const std::string& command) {
  atomic_write(cfg.out_dir / ("config_" + command + ".json"), config_to_json(cfg).dump(2) + "\n");
}

fs::path or_default(const fs::path& p, const fs::path& def) { return p.empty() ? def : p; }

fs::path model_file(const PipelineConfig& cfg) { return or_default(cfg.model_path, cfg.out_dir / "model.json"); }
fs::path noisy_train(const PipelineConfig& cfg) {
  return or_default(cfg.train_log, cfg.out_dir / ("train_noisy." + ext(cfg.format)));
}
fs::path noisy_test(const PipelineConfig& cfg) {
  return or_default(cfg.test_log, cfg.out_dir / ("test_noisy." + ext(cfg.format)));
}
fs::path test_labels(const PipelineConfig& cfg) {
  return or_default(cfg.test_labels, cfg.out_dir / "test_labels.jsonl");
}

std::optional<ProcessModel> maybe_model(const PipelineConfig& cfg) {
  const auto path = model_file(cfg);
  if (!fs::exists(path)) return std::nullopt;
  return read_model(path);
}

std::size_t capacity_for(const PipelineConfig& cfg, const ProcessModel* model, const EventLog& log) {
  if (cfg.capacity > 0) return cfg.capacity;
  if (model) return model->max_variant_length() + 1;
  return log.max_trace_len();
}

EventLog read_input(const fs::path& path, LogFormat fallback) {
  return read_log(path, format_for(path, fallback));
}

void check_detector(const std::string& d) {
  if (d != "dae" && d != "tstide" && d != "tstide+" && d != "random") {
    throw ConfigError("detector.name: unknown detector '" + d + "' (expected dae|tstide|tstide+|random)");
  }
}

fs::path fitted_file(const PipelineConfig& cfg) {
  if (cfg.detector == "dae") return cfg.out_dir / "dae.bpadnet";
  return cfg.out_dir / (detector_stem(cfg.detector) + ".json");
}

std::uint64_t train_seed(const PipelineConfig& cfg) { return derive_seed(cfg.seed, "train"); }

void write_scores(const PipelineConfig& cfg, const ScoreReport& report, const EventLog& log) {
  const auto stem = cfg.out_dir / ("scores_" + detector_stem(cfg.detector));
  ojson meta;
  meta["detector"] = report.detector;
  meta["slot_names"] = report.slot_names;
  meta["max_len"] = report.max_len;
  meta["alpha"] = report.threshold.alpha;
  meta["mean"] = {{"trace", report.threshold.mean[Resolution::Trace]},
                  {"event", report.threshold.mean[Resolution::Event]},
                  {"attribute", report.threshold.mean[Resolution::Attribute]}};
  atomic_write(stem.string() + ".jsonl", report_jsonl(report));
  atomic_write(stem.string() + ".meta.json", meta.dump(2) + "\n");
  const auto hm = cfg.out_dir / ("heatmap_" + detector_stem(cfg.detector));
  atomic_write(hm.string() + ".csv", heatmap_csv(report));
  atomic_write(hm.string() + ".svg", heatmap_svg(report, log, cfg.heatmap));
}

ScoreReport read_scores(const PipelineConfig& cfg) {
  const auto stem = cfg.out_dir / ("scores_" + detector_stem(cfg.detector));
  const auto meta = ojson::parse(read_file(stem.string() + ".meta.json"), nullptr, false);
  if (meta.is_discarded()) throw DataError(stem.string() + ".meta.json: invalid JSON");
  try {
    auto report = parse_report_jsonl(read_file(stem.string() + ".jsonl"), meta.at("detector"),
                                     meta.at("slot_names").get<std::vector<std::string>>());
    report.max_len = meta.at("max_len");
    report.threshold.alpha = meta.at("alpha");
    report.threshold.mean[Resolution::Trace] = meta.at("mean").at("trace");
    report.threshold.mean[Resolution::Event] = meta.at("mean").at("event");
    report.threshold.mean[Resolution::Attribute] = meta.at("mean").at("attribute");
    return report;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(stem.string() + ".meta.json: " + e.what());
  }
}

}  // namespace

std::string detector_stem(const std::string& detector) {
  return detector == "tstide+" ? "tstide_plus" : detector;
}

ojson config_to_json(const PipelineConfig& c) {
  ojson j;
  j["seed"] = c.seed;
  j["gen"] = {{"model", c.model},
              {"graph_seed", c.graph_seed},
              {"train_size", c.train_size},
              {"test_size", c.test_size},
              {"n_activities", c.gen.n_activities},
              {"target_edges", c.gen.target_edges},
              {"target_variants", c.gen.target_variants},
              {"target_max_len", c.gen.target_max_len},
              {"n_users", c.gen.n_users},
              {"max_users_per_activity", c.gen.max_users_per_activity},
              {"variant_prob_mu", c.gen.variant_prob_mu},
              {"variant_prob_sigma", c.gen.variant_prob_sigma},
              {"max_variants", c.gen.max_variants}};
  j["inject"] = {{"train_noise", c.train_noise},
                 {"test_noise", c.test_noise},
                 {"types", type_names(c.types)},
                 {"capacity", c.capacity}};
  const auto& t = c.train;
  j["train"] = {{"batch_size", t.batch_size},
                {"max_epochs", t.max_epochs},
                {"early_stop_patience", t.early_stop_patience},
                {"lr", t.lr},
                {"lr_plateau_patience", t.lr_plateau_patience},
                {"lr_factor", t.lr_factor},
                {"beta1", t.beta1},
                {"beta2", t.beta2},
                {"epsilon", t.epsilon},
                {"dropout_rate", t.dropout_rate},
                {"noise_mu", t.noise_mu},
                {"noise_sigma", t.noise_sigma},
                {"hidden_size_ratio", t.hidden_size_ratio},
                {"n_hidden_layers", t.n_hidden_layers},
                {"validation_fraction", t.validation_fraction}};
  j["detector"] = {{"name", c.detector},
                   {"alpha", c.alpha},
                   {"k", c.k},
                   {"random_p", c.random_p},
                   {"unknown_column", c.unknown_column}};
  const auto& e = c.eval;
  j["eval"] = {{"models", e.models},
               {"noise_levels", e.noise_levels},
               {"test_noise", e.test_noise ? ojson(*e.test_noise) : ojson(nullptr)},
               {"seeds", e.seeds},
               {"detectors", e.detectors},
               {"train_size", e.train_size},
               {"test_size", e.test_size},
               {"alpha_grid", e.alpha_grid},
               {"record_timing", e.record_timing}};
  j["heatmap"] = {{"max_traces", c.heatmap.max_traces}, {"max_events", c.heatmap.max_events}};
  j["paths"] = {{"out_dir", c.out_dir.string()},
                {"format", std::string(to_string(c.format))},
                {"model", c.model_path.string()},
                {"train_log", c.train_log.string()},
                {"test_log", c.test_log.string()},
                {"train_labels", c.train_labels.string()},
                {"test_labels", c.test_labels.string()}};
  return j;
}

PipelineConfig config_from_json(const ojson& j) {
  // Reject unknown keys against the default document.
  ojson shape = config_to_json(PipelineConfig{});
  merge(shape, j, "");

  PipelineConfig c;
  c.seed = get<std::uint64_t>(shape, "seed");
  c.model = get<std::string>(shape, "gen.model");
  c.graph_seed = get<std::uint64_t>(shape, "gen.graph_seed");
  c.train_size = get<std::size_t>(shape, "gen.train_size");
  c.test_size = get<std::size_t>(shape, "gen.test_size");
  c.gen.n_activities = get<std::size_t>(shape, "gen.n_activities");
  c.gen.target_edges = get<std::size_t>(shape, "gen.target_edges");
  c.gen.target_variants = get<std::size_t>(shape, "gen.target_variants");
  c.gen.target_max_len = get<std::size_t>(shape, "gen.target_max_len");
  c.gen.n_users = get<std::size_t>(shape, "gen.n_users");
  c.gen.max_users_per_activity = get<std::size_t>(shape, "gen.max_users_per_activity");
  c.gen.variant_prob_mu = get<double>(shape, "gen.variant_prob_mu");
  c.gen.variant_prob_sigma = get<double>(shape, "gen.variant_prob_sigma");
  c.gen.max_variants = get<std::size_t>(shape, "gen.max_variants");

  c.train_noise = get<double>(shape, "inject.train_noise");
  c.test_noise = get<double>(shape, "inject.test_noise");
  c.types = types_from(get<std::vector<std::string>>(shape, "inject.types"), "inject.types");
  c.capacity = get<std::size_t>(shape, "inject.capacity");

  auto& t = c.train;
  t.batch_size = get<std::size_t>(shape, "train.batch_size");
  t.max_epochs = get<std::size_t>(shape, "train.max_epochs");
  t.early_stop_patience = get<std::size_t>(shape, "train.early_stop_patience");
  t.lr = get<double>(shape, "train.lr");
  t.lr_plateau_patience = get<std::size_t>(shape, "train.lr_plateau_patience");
  t.lr_factor = get<double>(shape, "train.lr_factor");
  t.beta1 = get<double>(shape, "train.beta1");
  t.beta2 = get<double>(shape, "train.beta2");
  t.epsilon = get<double>(shape, "train.epsilon");
  t.dropout_rate = get<double>(shape, "train.dropout_rate");
  t.noise_mu = get<double>(shape, "train.noise_mu");
  t.noise_sigma = get<double>(shape, "train.noise_sigma");
  t.hidden_size_ratio = get<double>(shape, "train.hidden_size_ratio");
  t.n_hidden_layers = get<std::size_t>(shape, "train.n_hidden_layers");
  t.validation_fraction = get<double>(shape, "train.validation_fraction");
  t.seed = derive_seed(c.seed, "train");

  c.detector = get<std::string>(shape, "detector.name");
  c.alpha = get<double>(shape, "detector.alpha");
  c.k = get<std::size_t>(shape, "detector.k");
  c.random_p = get<double>(shape, "detector.random_p");
  c.unknown_column = get<bool>(shape, "detector.unknown_column");

  auto& e = c.eval;
  e.models = get<std::vector<std::string>>(shape, "eval.models");
  e.noise_levels = get<std::vector<double>>(shape, "eval.noise_levels");
  if (!shape["eval"]["test_noise"].is_null()) e.test_noise = get<double>(shape, "eval.test_noise");
  e.seeds = get<std::vector<std::uint64_t>>(shape, "eval.seeds");
  e.detectors = get<std::vector<std::string>>(shape, "eval.detectors");
  e.train_size = get<std::size_t>(shape, "eval.train_size");
  e.test_size = get<std::size_t>(shape, "eval.test_size");
  e.alpha_grid = get<std::vector<double>>(shape, "eval.alpha_grid");
  e.record_timing = get<bool>(shape, "eval.record_timing");
  e.types = c.types;
  e.graph_seed = c.graph_seed;
  e.settings.k = c.k;
  e.settings.random_p = c.random_p;
  e.settings.unknown_column = c.unknown_column;
  e.settings.train = c.train;

  c.heatmap.max_traces = get<std::size_t>(shape, "heatmap.max_traces");
  c.heatmap.max_events = get<std::size_t>(shape, "heatmap.max_events");

  c.out_dir = get<std::string>(shape, "paths.out_dir");
  try {
    c.format = parse_log_format(get<std::string>(shape, "paths.format"));
  } catch (const DataError& err) {
    throw ConfigError(std::string("paths.format: ") + err.what());
  }
  c.model_path = get<std::string>(shape, "paths.model");
  c.train_log = get<std::string>(shape, "paths.train_log");
  c.test_log = get<std::string>(shape, "paths.test_log");
  c.train_labels = get<std::string>(shape, "paths.train_labels");
  c.test_labels = get<std::string>(shape, "paths.test_labels");

  check_detector(c.detector);
  if (c.k == 0) throw ConfigError("detector.k must be positive");
  if (!(c.random_p >= 0.0 && c.random_p <= 1.0)) throw ConfigError("detector.random_p must be in [0, 1]");
  if (!(c.alpha >= 0.0)) throw ConfigError("detector.alpha must be non-negative");
  for (double n : {c.train_noise, c.test_noise}) {
    if (!(n >= 0.0 && n <= 1.0)) throw ConfigError("inject noise levels must be in [0, 1]");
  }
  c.gen.validate();
  c.train.validate();
  c.eval.validate();
  return c;
}

void apply_override(ojson& doc, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError("--set expects section.key=value, got '" + std::string(assignment) + "'");
  }
  const std::string path(assignment.substr(0, eq));
  const std::string text(assignment.substr(eq + 1));
  ojson value = ojson::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  ojson* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const auto key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty() || !node->is_object() || !node->contains(key)) throw ConfigError(path + ": unknown key");
    node = &(*node)[key];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  if (node->is_object()) throw ConfigError(path + ": is a section, not a key");
  *node = std::move(value);
}

PipelineConfig load_config(const std::optional<fs::path>& file, const std::vector<std::string>& sets) {
  ojson doc = config_to_json(PipelineConfig{});
  if (file) {
    std::string text;
    try {
      text = read_file(*file);
    } catch (const DataError& e) {
      throw ConfigError(e.what());
    }
    const auto parsed = ojson::parse(text, nullptr, false);
    if (parsed.is_discarded()) throw ConfigError(file->string() + ": not valid JSON");
    merge(doc, parsed, "");
  }
  for (const auto& s : sets) apply_override(doc, s);
  return config_from_json(doc);
}

// ---------------------------------------------------------------------------

void cmd_generate(const PipelineConfig& cfg) {
  if (cfg.format == LogFormat::Xes) throw ConfigError("paths.format: xes is import-only");
  ProcessModel base = [&] {
    if (cfg.model != "custom") return model_for(cfg.model, cfg.graph_seed, cfg.seed);
    GenConfig g = cfg.gen;
    g.seed = derive_seed(cfg.graph_seed, "graph/custom");
    return assign_users(generate_model(g), g.n_users, g.max_users_per_activity, derive_seed(cfg.seed, "users"));
  }();
  const auto model = with_random_variant_probs(std::move(base), cfg.gen.variant_prob_mu, cfg.gen.variant_prob_sigma,
                                               derive_seed(cfg.seed, "variant-probs"));
  const auto train = sample_log(model, cfg.train_size, derive_seed(cfg.seed, "sample/train"));
  const auto test = sample_log(model, cfg.test_size, derive_seed(cfg.seed, "sample/test"));
  fs::create_directories(cfg.out_dir);
  write_model(model, cfg.out_dir / "model.json");
  write_log(train, cfg.out_dir / ("train." + ext(cfg.format)), cfg.format);
  write_log(test, cfg.out_dir / ("test." + ext(cfg.format)), cfg.format);
  echo_config(cfg, "generate");
  log::info("generated " + std::to_string(model.variants.size()) + " variants");
}

void cmd_inject(const PipelineConfig& cfg) {
  if (cfg.format == LogFormat::Xes) throw ConfigError("paths.format: xes is import-only");
  const auto model = maybe_model(cfg);
  const auto train_in = or_default(cfg.train_log, cfg.out_dir / ("train." + ext(cfg.format)));
  const auto test_in = or_default(cfg.test_log, cfg.out_dir / ("test." + ext(cfg.format)));
  const auto train = read_input(train_in, cfg.format);
  const auto test = read_input(test_in, cfg.format);

  InjectConfig ic;
  ic.enabled_types = cfg.types;
  const bool user_ok = model && model->has_users() && train.attribute_index(kUserAttribute) &&
                       test.attribute_index(kUserAttribute);
  if (!user_ok) {
    const auto before = ic.enabled_types.size();
    std::erase_if(ic.enabled_types, needs_model);
    if (ic.enabled_types.size() != before) log::warn("no model or user attribute: user anomalies disabled");
    if (ic.enabled_types.empty()) throw ConfigError("inject.types: no applicable anomaly types");
  }
  ic.max_trace_len = std::max(capacity_for(cfg, model ? &*model : nullptr, train),
                              capacity_for(cfg, model ? &*model : nullptr, test));
  const ProcessModel* mp = user_ok ? &*model : nullptr;

  ic.noise_level = cfg.train_noise;
  ic.seed = derive_seed(cfg.seed, "inject/train");
  const auto tr = inject(train, mp, ic);
  ic.noise_level = cfg.test_noise;
  ic.seed = derive_seed(cfg.seed, "inject/test");
  const auto te = inject(test, mp, ic);

  fs::create_directories(cfg.out_dir);
  write_log(tr.log, cfg.out_dir / ("train_noisy." + ext(cfg.format)), cfg.format);
  write_labels(tr.labels, cfg.out_dir / "train_labels.jsonl");
  write_log(te.log, cfg.out_dir / ("test_noisy." + ext(cfg.format)), cfg.format);
  write_labels(te.labels, cfg.out_dir / "test_labels.jsonl");
  echo_config(cfg, "inject");
}

void cmd_train(const PipelineConfig& cfg) {
  const auto log = read_input(noisy_train(cfg), cfg.format);
  fs::create_directories(cfg.out_dir);
  if (cfg.detector == "dae") {
    const auto model = maybe_model(cfg);
    LayoutOptions lo;
    lo.max_len = capacity_for(cfg, model ? &*model : nullptr, log);
    lo.unknown_column = cfg.unknown_column;
    const auto layout = build_layout(log, lo);
    const auto net = train(encode(log, layout), layout, cfg.train);
    save_artifact(net, cfg.alpha, fitted_file(cfg));
    atomic_write(cfg.out_dir / "dae_history.csv", history_csv(net.history));
  } else if (cfg.detector == "random") {
    ojson j{{"format", "bpad-random"}, {"version", 1}, {"p", cfg.random_p}};
    atomic_write(fitted_file(cfg), j.dump(2) + "\n");
  } else {
    const auto kind = cfg.detector == "tstide" ? WindowKind::Activity : WindowKind::ActivityAttributes;
    atomic_write(fitted_file(cfg), serialize_window_model(tstide_fit(log, cfg.k, kind)));
  }
  echo_config(cfg, "train_" + detector_stem(cfg.detector));
}

void cmd_score(const PipelineConfig& cfg) {
  const auto log = read_input(noisy_test(cfg), cfg.format);
  ScoreReport report;
  if (cfg.detector == "dae") {
    report = dae_score(load_artifact(fitted_file(cfg)), log, cfg.alpha);
  } else if (cfg.detector == "random") {
    const auto j = ojson::parse(read_file(fitted_file(cfg)), nullptr, false);
    if (j.is_discarded() || !j.contains("p") || !j["p"].is_number()) {
      throw DataError(fitted_file(cfg).string() + ": not a random-baseline file");
    }
    report = random_baseline(log, j["p"].get<double>(), derive_seed(train_seed(cfg), "random"));
  } else {
    report = tstide_score(parse_window_model(read_file(fitted_file(cfg))), log, cfg.alpha);
  }
  fs::create_directories(cfg.out_dir);
  write_scores(cfg, report, log);
  echo_config(cfg, "score_" + detector_stem(cfg.detector));
}

void cmd_evaluate(const PipelineConfig& cfg) {
  const auto log = read_input(noisy_test(cfg), cfg.format);
  const auto labels = read_labels(test_labels(cfg), log);
  const auto report = read_scores(cfg);
  const auto stem = detector_stem(cfg.detector);
  atomic_write(cfg.out_dir / ("metrics_" + stem + ".csv"), metrics_csv(cfg.detector, score_to_metrics(report, labels)));
  if (cfg.detector != "random") {
    const LabeledReport lr{report, labels};
    const auto search = grid_search_alpha(std::span(&lr, 1), cfg.eval.alpha_grid);
    std::string csv = "alpha,trace_f1_macro,best\n";
    for (const auto& [a, f] : search.curve) {
      csv += format_double(a) + "," + format_double(f) + "," + (a == search.best_alpha ? "1" : "0") + "\n";
    }
    atomic_write(cfg.out_dir / ("alpha_curve_" + stem + ".csv"), csv);
  }
  echo_config(cfg, "evaluate_" + stem);
}

void cmd_sweep(const PipelineConfig& cfg) {
  ExperimentSpec spec = cfg.eval;
  spec.out_dir = cfg.out_dir / "sweep";
  fs::create_directories(spec.out_dir);
  const auto result = run_sweep(spec);
  echo_config(cfg, "sweep");
  if (!result.failures.empty()) {
    std::string text = "model,noise,seed,error\n";
    for (const auto& f : result.failures) text += f + "\n";
    atomic_write(spec.out_dir / "failures.csv", text);
    log::warn(std::to_string(result.failures.size()) + " sweep cell(s) failed; see failures.csv");
  }
}

void cmd_heatmap(const PipelineConfig& cfg) {
  const auto log = read_input(noisy_test(cfg), cfg.format);
  const auto report = read_scores(cfg);
  const auto hm = cfg.out_dir / ("heatmap_" + detector_stem(cfg.detector));
  atomic_write(hm.string() + ".csv", heatmap_csv(report));
  atomic_write(hm.string() + ".svg", heatmap_svg(report, log, cfg.heatmap));
}

}  // namespace bpad
