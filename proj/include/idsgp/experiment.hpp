#pragma once

#include <string>
#include <utility>
#include <vector>

#include "idsgp/checkpoint.hpp"
#include "idsgp/config.hpp"
#include "idsgp/training.hpp"

// End-to-end runs driven by a Config; the command-line tool is a thin layer
// over these.

namespace idsgp {

/// Raw data from data.path or data.toy plus the seeded train/test split.
/// Throws ConfigError("data.path") when neither source is set.
struct ExperimentData {
  Dataset raw;
  Split split;
};
ExperimentData load_experiment_data(const ExperimentConfig& cfg);

struct TrainRun {
  Checkpoint checkpoint;
  std::vector<MetricRecord> records;
  std::vector<std::string> files;  // artifacts written, in order
};

/// Trains on the configured data and writes into output.dir:
///   checkpoint.json   model, standardization and config echo
///   metrics.jsonl     one record per evaluation epoch
///   config.txt        resolved configuration (re-usable as --config)
///   train.csv / test.csv  the split on the original scale
///   grid.csv          predictive mean/std on a grid (inputs of dimension ≤ 2)
///   inducing.csv      inducing points: Z(x̃) at the probe x̃ for IDSGP, the
///                     shared Z for VSGP (inputs of dimension ≤ 2)
TrainRun run_train(const Config& config);

/// Predictions on raw inputs. Columns: mean, std (latent), then y_std
/// (including noise) for regression or p1 = P(y=1) for classification.
/// Regression outputs are on the original target scale unless
/// `standardized_scale` is set.
struct PredictionTable {
  std::vector<std::string> header;
  Tensor values;  // rows × 3
};
PredictionTable predict_table(const Checkpoint& ckpt, const Tensor& X_raw, bool standardized_scale = false);
/// Reads `input_csv` (columns matched to the checkpoint features by name, or
/// by position when the count equals the input dimension) and writes `output_csv`.
void run_predict(const std::string& checkpoint_path, const std::string& input_csv,
                 const std::string& output_csv, bool standardized_scale = false);

/// Test-set metrics of a checkpoint. With `data_csv` empty the configured
/// data and split are used; otherwise every row of the file is a test row.
Evaluation run_eval(const std::string& checkpoint_path, const Config& config,
                    const std::string& data_csv = "");

struct BenchRow {
  std::string name;
  ModelSpec spec;
  std::size_t n_train = 0;
  std::size_t repeats = 0;
  double epoch_mean = 0.0;
  double epoch_se = 0.0;
  double predict_mean = 0.0;
  double predict_se = 0.0;
};

/// Per config: warmup epochs, then timed epochs and a timed prediction pass,
/// repeated bench.repeats times. Uses all rows of the data for training.
/// Standard errors are across repeats (0 for a single repeat).
std::vector<BenchRow> run_benchmark(const std::vector<std::pair<std::string, Config>>& configs);
std::string format_benchmark(const std::vector<BenchRow>& rows);

/// Writes the configured toy data set (raw) as CSV.
void run_make_data(const Config& config, const std::string& output_csv);

}  // namespace idsgp
