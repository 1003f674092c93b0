#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "idsgp/data.hpp"
#include "idsgp/models.hpp"
#include "idsgp/training.hpp"

// Experiment configuration: a flat set of dotted keys ("model.kind",
// "train.lr") holding text values. Every key has a default; presets, config
// files and command-line overrides are layered on top in that order.

namespace idsgp {

class Config {
 public:
  /// All keys at their default values.
  Config();

  /// Throws ConfigError for an unknown key.
  void set(const std::string& key, const std::string& value);
  const std::string& get(const std::string& key) const;
  bool has_key(const std::string& key) const { return values_.count(key) != 0; }
  const std::map<std::string, std::string>& values() const noexcept { return values_; }

  /// Applies a named preset (ConfigError with key "preset" if unknown).
  void apply_preset(const std::string& name);
  /// `key = value` lines; '#' starts a comment.
  void merge_text(const std::string& text, const std::string& source = "<config>");
  void merge_file(const std::string& path);
  /// "key=value" command-line override.
  void merge_override(const std::string& assignment);

  /// Every key, sorted, in the file format. Reading it back gives an identical Config.
  std::string echo() const;

  friend bool operator==(const Config& a, const Config& b) { return a.values_ == b.values_; }

 private:
  std::map<std::string, std::string> values_;
};

std::vector<std::string> preset_names();
/// One line per key: key, default and a short description.
std::string describe_keys();

struct DataConfig {
  std::string path;
  std::string toy;
  std::size_t n = 0;  // 0: the toy's default size
  std::size_t dim = 8;
  Task task = Task::regression;
  std::string target = "-1";
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
};

struct PlotConfig {
  bool enabled = true;
  std::size_t grid_points = 200;  // 1-D grid
  std::size_t grid_side = 60;     // 2-D grid is grid_side²
  std::vector<double> probe;      // raw input units; empty: mean of the training inputs
};

struct BenchConfig {
  std::size_t repeats = 1;
  std::size_t warmup_epochs = 1;
  std::size_t timed_epochs = 5;
  std::size_t predict_points = 10000;
};

struct ExperimentConfig {
  ModelSpec model;  // input_dim is filled in from the data
  bool likelihood_auto = true;
  TrainConfig train;
  DataConfig data;
  std::string output_dir;
  PlotConfig plot;
  BenchConfig bench;
};

/// Typed, validated view. Errors name the offending key.
ExperimentConfig resolve(const Config& config);

}  // namespace idsgp
