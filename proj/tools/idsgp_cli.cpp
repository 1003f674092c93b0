#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "idsgp/errors.hpp"
#include "idsgp/experiment.hpp"
#include "idsgp/log.hpp"

using namespace idsgp;

namespace {

constexpr int kOk = 0;
constexpr int kNumeric = 1;
constexpr int kUsage = 2;

struct CommonOptions {
  std::vector<std::string> presets;
  std::vector<std::string> config_files;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonOptions& o, bool many_presets = false) {
  auto* preset = cmd->add_option("--preset", o.presets,
                                 many_presets ? "Named preset, one benchmark row each (repeatable)"
                                              : "Named experiment preset");
  preset->allow_extra_args(false);
  cmd->add_option("--config", o.config_files, "Config file of 'key = value' lines (repeatable)")
      ->allow_extra_args(false);
  cmd->add_option("--seed", o.seed, "Sets train.seed");
  cmd->add_option("--out", o.out, "Sets output.dir");
  cmd->add_option("overrides", o.overrides, "key=value overrides, e.g. train.epochs=50");
}

/// defaults < preset < config files < flags.
Config build_config(const CommonOptions& o, const std::string& preset, const std::string& base = "") {
  Config c;
  if (!base.empty()) c.merge_text(base, "<checkpoint config>");
  if (!preset.empty()) c.apply_preset(preset);
  for (const std::string& f : o.config_files) c.merge_file(f);
  if (o.seed) c.set("train.seed", std::to_string(*o.seed));
  if (!o.out.empty()) c.set("output.dir", o.out);
  for (const std::string& a : o.overrides) c.merge_override(a);
  return c;
}

std::string single_preset(const CommonOptions& o) {
  if (o.presets.size() > 1) throw ConfigError("preset", "only one --preset is allowed here");
  return o.presets.empty() ? "" : o.presets.front();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Input-dependent sparse Gaussian processes: training, prediction and benchmarks"};
  app.require_subcommand(1);
  app.add_flag_callback(
      "--list-keys",
      [&] {
        std::cout << "configuration keys (defaults shown):\n" << describe_keys() << "presets:";
        for (const std::string& p : preset_names()) std::cout << ' ' << p;
        std::cout << '\n';
        throw CLI::Success();
      },
      "Print every configuration key and the presets");

  CommonOptions train_o, eval_o, bench_o, data_o;
  std::string ckpt_path, input_path, output_path, eval_data, toy;
  bool standardized = false;
  std::optional<std::size_t> toy_n;

  auto* train_cmd = app.add_subcommand("train", "Train a model and write its artifacts to output.dir");
  add_common(train_cmd, train_o);

  auto* predict_cmd = app.add_subcommand("predict", "Predict with a checkpoint on a CSV of inputs");
  predict_cmd->add_option("--checkpoint", ckpt_path, "checkpoint.json from train")->required();
  predict_cmd->add_option("--input", input_path, "CSV with a header row")->required();
  predict_cmd->add_option("--output", output_path, "Output CSV")->required();
  predict_cmd->add_flag("--standardized", standardized, "Report regression outputs on the standardized scale");

  auto* eval_cmd = app.add_subcommand("eval", "Test-set metrics of a checkpoint");
  eval_cmd->add_option("--checkpoint", ckpt_path, "checkpoint.json from train")->required();
  eval_cmd->add_option("--data", eval_data, "CSV to evaluate on (default: the training run's test split)");
  add_common(eval_cmd, eval_o);

  auto* bench_cmd = app.add_subcommand("benchmark", "Per-epoch training and prediction timings");
  add_common(bench_cmd, bench_o, true);

  auto* data_cmd = app.add_subcommand("make-data", "Write a synthetic data set as CSV");
  data_cmd->add_option("--output", output_path, "Output CSV")->required();
  data_cmd->add_option("--toy", toy, "snelson1d | banana | synth (sets data.toy)");
  data_cmd->add_option("--n", toy_n, "Number of rows (sets data.n)");
  add_common(data_cmd, data_o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (train_cmd->parsed()) {
      const Config config = build_config(train_o, single_preset(train_o));
      const TrainRun run = run_train(config);
      for (const std::string& f : run.files) std::cout << f << '\n';
    } else if (predict_cmd->parsed()) {
      run_predict(ckpt_path, input_path, output_path, standardized);
    } else if (eval_cmd->parsed()) {
      const Checkpoint ckpt = load_checkpoint(ckpt_path);
      const Config config = build_config(eval_o, single_preset(eval_o), ckpt.config);
      const Evaluation e = run_eval(ckpt_path, config, eval_data);
      std::cout << std::setprecision(17) << "{\"nll\": " << e.nll << ", \""
                << (ckpt.task == Task::regression ? "rmse" : "error") << "\": " << e.rmse_or_error
                << "}\n";
    } else if (bench_cmd->parsed()) {
      std::vector<std::string> presets = bench_o.presets;
      if (presets.empty() && bench_o.config_files.empty()) presets = {"bench-idsgp", "bench-vsgp"};
      std::vector<std::pair<std::string, Config>> configs;
      if (presets.empty()) configs.emplace_back("config", build_config(bench_o, ""));
      for (const std::string& p : presets) configs.emplace_back(p, build_config(bench_o, p));
      const std::string table = format_benchmark(run_benchmark(configs));
      std::cout << table;
      const std::filesystem::path dir = resolve(configs.front().second).output_dir;
      std::filesystem::create_directories(dir);
      std::ofstream(dir / "benchmark.csv") << table;
    } else if (data_cmd->parsed()) {
      Config config = build_config(data_o, single_preset(data_o));
      if (!toy.empty()) config.set("data.toy", toy);
      if (toy_n) config.set("data.n", std::to_string(*toy_n));
      run_make_data(config, output_path);
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what();
    if (!e.key().empty()) std::cerr << " [key: " << e.key() << "]";
    std::cerr << '\n';
    return kUsage;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const ShapeError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumeric;
  }
  return kOk;
}
