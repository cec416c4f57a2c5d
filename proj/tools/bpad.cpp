// bpad: event log generation, anomaly injection, detector training, scoring
// and evaluation from one binary.
//
// Exit codes: 0 success, 1 usage or config error, 2 data error, 3 internal error.

#include <CLI11.hpp>
#include <iostream>

#include "bpad/error.hpp"
#include "bpad/pipeline.hpp"

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> sets;
  std::string out_dir;
  std::string detector;
  std::string format;
};

bpad::PipelineConfig resolve(const Options& o) {
  std::vector<std::string> sets;
  if (o.seed) sets.push_back("seed=" + std::to_string(*o.seed));
  if (!o.out_dir.empty()) sets.push_back("paths.out_dir=\"" + o.out_dir + "\"");
  if (!o.detector.empty()) sets.push_back("detector.name=\"" + o.detector + "\"");
  if (!o.format.empty()) sets.push_back("paths.format=\"" + o.format + "\"");
  // Explicit --set flags win over the shorthand flags.
  sets.insert(sets.end(), o.sets.begin(), o.sets.end());
  std::optional<std::filesystem::path> file;
  if (!o.config.empty()) file = o.config;
  return bpad::load_config(file, sets);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Business process anomaly detection toolkit"};
  app.require_subcommand(1);
  Options opts;
  app.add_option("--config", opts.config, "JSON config file")->check(CLI::ExistingFile);
  app.add_option("--seed", opts.seed, "Global seed");
  app.add_option("--set", opts.sets, "Override a config field: section.key=value")->allow_extra_args(false);
  app.add_option("--out-dir", opts.out_dir, "Output directory");
  app.add_option("--detector", opts.detector, "Detector")->check(CLI::IsMember({"dae", "tstide", "tstide+", "random"}));
  app.add_option("--format", opts.format, "Log file format")->check(CLI::IsMember({"jsonl", "csv", "xes"}));

  using Cmd = void (*)(const bpad::PipelineConfig&);
  const std::pair<const char*, Cmd> commands[] = {
      {"generate", bpad::cmd_generate}, {"inject", bpad::cmd_inject}, {"train", bpad::cmd_train},
      {"score", bpad::cmd_score},       {"evaluate", bpad::cmd_evaluate}, {"sweep", bpad::cmd_sweep},
      {"heatmap", bpad::cmd_heatmap},
  };
  const char* help[] = {"Generate a process model and clean train/test logs",
                        "Inject anomalies into the train/test logs and write labels",
                        "Fit the selected detector on the noisy training log",
                        "Score the noisy test log (JSONL, heatmap CSV and SVG)",
                        "Compute macro F1 per resolution against the test labels",
                        "Run a noise/model/seed sweep over all detectors",
                        "Render heatmaps from stored scores"};
  std::vector<std::pair<CLI::App*, Cmd>> subs;
  for (std::size_t i = 0; i < std::size(commands); ++i) {
    subs.emplace_back(app.add_subcommand(commands[i].first, help[i]), commands[i].second);
    subs.back().first->fallthrough();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    const auto cfg = resolve(opts);
    for (const auto& [sub, fn] : subs) {
      if (sub->parsed()) fn(cfg);
    }
    return 0;
  } catch (const bpad::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const bpad::GenerationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const bpad::DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  }
}
