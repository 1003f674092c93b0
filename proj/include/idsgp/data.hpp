#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "idsgp/tensor.hpp"

namespace idsgp {

enum class Task { regression, binary };

std::string to_string(Task task);
Task parse_task(const std::string& text);

/// Per-dimension input shift/scale, plus the target shift/scale for
/// regression (identity for binary tasks).
struct Standardization {
  std::vector<double> x_mean;
  std::vector<double> x_std;
  double y_mean = 0.0;
  double y_std = 1.0;
};

/// N×d inputs and N targets. Binary targets are held as -1/+1.
struct Dataset {
  Tensor X = Tensor(Shape{0, 0});
  Tensor y = Tensor(Shape{0});
  Task task = Task::regression;
  std::vector<std::string> feature_names;
  std::string target_name = "y";
  /// Statistics this dataset was standardized with (identity when raw).
  Standardization stats;
  bool standardized = false;

  std::size_t size() const { return X.dim(0); }
  std::size_t dim() const { return X.dim(1); }
};

/// Reads a comma-separated file with a header row. `target` is a column name
/// or a 0-based index (negative counts from the end). Constant input columns
/// are dropped with a warning. Binary labels must be 0/1 on disk.
Dataset load_csv(const std::string& path, Task task, const std::string& target = "-1");
Dataset parse_csv(const std::string& text, Task task, const std::string& target = "-1",
                  const std::string& source = "<memory>");

/// A numeric table with a header row and no target selection or column
/// filtering (used for prediction inputs).
struct CsvTable {
  std::vector<std::string> header;
  Tensor values = Tensor(Shape{0, 0});
};
CsvTable parse_csv_table(const std::string& text, const std::string& source = "<memory>");
CsvTable read_csv_table(const std::string& path);

/// Writes X columns then the target; binary targets are written as 0/1.
/// Standardized datasets are written on their original scale.
void write_csv(const Dataset& data, const std::string& path);

Standardization compute_standardization(const Dataset& raw);
Dataset standardize(const Dataset& raw, const Standardization& stats);
Dataset destandardize(const Dataset& data);

struct Split {
  Dataset train;
  Dataset test;
  std::vector<std::size_t> train_index;
  std::vector<std::size_t> test_index;
};

/// Seeded permutation split; both parts are standardized with statistics of
/// the training rows only.
Split split(const Dataset& raw, double fraction, std::uint64_t seed);

Dataset take_rows(const Dataset& data, const std::vector<std::size_t>& rows);

enum class ToyKind { snelson1d, banana, synth };

std::string to_string(ToyKind kind);
ToyKind parse_toy_kind(const std::string& text);
std::size_t default_toy_size(ToyKind kind);

/// Synthetic data sets, raw (unstandardized):
///   snelson1d  1-D regression, smooth sin-based latent, gap in the inputs
///   banana     2-D binary, two noisy interleaved crescents
///   synth      `dim`-D regression with a smooth additive latent
Dataset make_toy(ToyKind kind, std::size_t n, std::uint64_t seed, std::size_t dim = 8);

}  // namespace idsgp
