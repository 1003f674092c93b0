#pragma once

#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "idsgp/data.hpp"
#include "idsgp/models.hpp"
#include "idsgp/random.hpp"

namespace idsgp {

struct TrainConfig {
  std::size_t batch_size = 100;
  double learning_rate = 0.01;
  std::size_t max_epochs = 100;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// Record metrics every this many epochs (the first and last epochs always are).
  std::size_t eval_every = 1;
  /// Global gradient norm cap; 0 disables clipping.
  double clip_norm = 100.0;
};

void validate(const TrainConfig& cfg, std::size_t n_train);

/// Test metrics are NaN when no test set is given. `rmse_or_error` is the
/// RMSE for regression and the error rate for classification.
struct MetricRecord {
  std::size_t epoch = 0;
  double wall_seconds = 0.0;
  double elbo = 0.0;
  double nll = 0.0;
  double rmse_or_error = 0.0;
};

struct AdamState {
  std::map<std::string, Tensor> m;
  std::map<std::string, Tensor> v;
  std::size_t t = 0;
};

/// One bias-corrected ADAM ascent step over every entry of `grads`. A
/// non-finite gradient throws NumericError naming the parameter and leaves
/// both `params` and `state` untouched.
void adam_step(ParameterSet& params, const std::map<std::string, Tensor>& grads, AdamState& state,
               const TrainConfig& cfg);

/// Rescales `grads` in place so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
double clip_global_norm(std::map<std::string, Tensor>& grads, double max_norm);

struct Evaluation {
  double nll = 0.0;
  double rmse_or_error = 0.0;
};

/// Metrics on the original target scale. `test` must be standardized with the
/// training statistics.
Evaluation evaluate(const Model& model, const Dataset& test);
Evaluation evaluate(const PredictiveDistribution& pred, const Model& model, const Dataset& test);

/// Full-data objective, computed in chunks and recombined exactly.
double full_objective(const Model& model, const Dataset& train);

/// Owns the shuffle stream and optimizer state of one training run.
class Trainer {
 public:
  Trainer(Model& model, const Dataset& train, const TrainConfig& cfg);

  /// One pass over shuffled mini-batches; returns the mean of the per-step
  /// objective estimates.
  double run_epoch();
  std::size_t epochs_done() const noexcept { return epoch_; }
  const AdamState& optimizer() const noexcept { return adam_; }

 private:
  Model& model_;
  const Dataset& train_;
  TrainConfig cfg_;
  Rng rng_;
  AdamState adam_;
  std::size_t epoch_ = 0;
};

using MetricSink = std::function<void(const MetricRecord&)>;

/// Runs cfg.max_epochs epochs. The epoch-0 record holds the full-data
/// objective at initialization; later records hold the epoch mean estimate.
std::vector<MetricRecord> train(Model& model, const Dataset& train, const Dataset* test,
                                const TrainConfig& cfg, const MetricSink& sink = {});

/// One JSON object per line, flushed after every record. NaN is written as null.
class MetricLog {
 public:
  explicit MetricLog(const std::string& path);
  void write(const MetricRecord& record);

 private:
  std::ofstream out_;
};

std::string to_json_line(const MetricRecord& record);

}  // namespace idsgp
