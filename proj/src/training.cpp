#include "idsgp/training.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include <json.hpp>

#include "idsgp/errors.hpp"
#include "idsgp/log.hpp"

namespace idsgp {

namespace {

constexpr std::size_t kEvalChunk = 1024;

Tensor gather_rows(const Tensor& X, const std::vector<std::size_t>& idx, std::size_t begin,
                   std::size_t end) {
  const std::size_t d = X.dim(1);
  Tensor out(Shape{end - begin, d});
  for (std::size_t i = begin; i < end; ++i)
    for (std::size_t c = 0; c < d; ++c) out(i - begin, c) = X(idx[i], c);
  return out;
}

Tensor gather(const Tensor& y, const std::vector<std::size_t>& idx, std::size_t begin,
              std::size_t end) {
  Tensor out(Shape{end - begin});
  for (std::size_t i = begin; i < end; ++i) out[i - begin] = y[idx[i]];
  return out;
}

std::vector<std::size_t> identity(std::size_t n) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  return idx;
}

}  // namespace

void validate(const TrainConfig& cfg, std::size_t n_train) {
  if (cfg.batch_size < 1) throw ConfigError("train.batch_size", "batch size must be at least 1");
  if (n_train > 0 && cfg.batch_size > n_train) {
    throw ConfigError("train.batch_size", "batch size " + std::to_string(cfg.batch_size) +
                                              " exceeds the " + std::to_string(n_train) +
                                              " training rows");
  }
  if (!(cfg.learning_rate > 0.0) || !std::isfinite(cfg.learning_rate))
    throw ConfigError("train.lr", "learning rate must be positive");
  if (!(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0)) throw ConfigError("train.beta1", "beta1 must lie in [0, 1)");
  if (!(cfg.beta2 >= 0.0 && cfg.beta2 < 1.0)) throw ConfigError("train.beta2", "beta2 must lie in [0, 1)");
  if (!(cfg.epsilon > 0.0)) throw ConfigError("train.epsilon", "epsilon must be positive");
  if (cfg.eval_every < 1) throw ConfigError("train.eval_every", "eval_every must be at least 1");
  if (!(cfg.clip_norm >= 0.0)) throw ConfigError("train.clip_norm", "clip norm must be non-negative");
}

void adam_step(ParameterSet& params, const std::map<std::string, Tensor>& grads, AdamState& state,
               const TrainConfig& cfg) {
  for (const auto& [name, g] : grads) {
    if (!params.contains(name)) throw std::out_of_range("adam_step: unknown parameter '" + name + "'");
    if (g.shape() != params.at(name).shape())
      throw ShapeError("adam_step: gradient shape mismatch for '" + name + "'");
    for (double v : g.data())
      if (!std::isfinite(v)) throw NumericError("non-finite gradient for parameter '" + name + "'");
  }
  const std::size_t t = state.t + 1;
  const double c1 = 1.0 - std::pow(cfg.beta1, double(t));
  const double c2 = 1.0 - std::pow(cfg.beta2, double(t));
  for (const auto& [name, g] : grads) {
    Tensor& p = params.at(name);
    auto [mit, fresh_m] = state.m.try_emplace(name, Tensor(g.shape(), 0.0));
    auto [vit, fresh_v] = state.v.try_emplace(name, Tensor(g.shape(), 0.0));
    Tensor& m = mit->second;
    Tensor& v = vit->second;
    for (std::size_t i = 0; i < g.numel(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      p[i] += cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
  }
  state.t = t;
}

double clip_global_norm(std::map<std::string, Tensor>& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& [name, g] : grads)
    for (double v : g.data()) sq += v * v;
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (auto& [name, g] : grads)
      for (double& v : g.data()) v *= s;
  }
  return norm;
}

Evaluation evaluate(const PredictiveDistribution& pred, const Model& model, const Dataset& test) {
  const std::size_t n = test.size();
  if (n == 0) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    return {nan, nan};
  }
  LikelihoodParams lik = model.hyper().likelihood;
  const Tensor y = test.y.reshaped({n});
  const Tensor logp = predictive_loglik(lik, pred.mean, pred.variance, y);
  double sum = 0.0;
  for (double v : logp.data()) sum += v;
  Evaluation e;
  if (test.task == Task::regression) {
    const double y_std = test.stats.y_std;
    e.nll = -sum / double(n) + std::log(y_std);
    double sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = pred.mean[i] - y[i];
      sq += r * r;
    }
    e.rmse_or_error = std::sqrt(sq / double(n)) * y_std;
  } else {
    e.nll = -sum / double(n);
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double p1 = probit_class_probability(pred.mean[i], pred.variance[i]);
      const double label = p1 >= 0.5 ? 1.0 : -1.0;
      wrong += label != y[i];
    }
    e.rmse_or_error = double(wrong) / double(n);
  }
  return e;
}

Evaluation evaluate(const Model& model, const Dataset& test) {
  if (test.size() == 0) return evaluate(PredictiveDistribution{}, model, test);
  return evaluate(predict(model, test.X), model, test);
}

double full_objective(const Model& model, const Dataset& train) {
  const std::size_t n = train.size();
  if (model.spec.kind == ModelKind::exact) return model_objective(model, train.X, train.y, n);
  const std::vector<std::size_t> idx = identity(n);
  double total = 0.0;
  for (std::size_t start = 0; start < n; start += kEvalChunk) {
    const std::size_t end = std::min(n, start + kEvalChunk);
    const double obj = model_objective(model, gather_rows(train.X, idx, start, end),
                                       gather(train.y, idx, start, end), n);
    total += double(end - start) / double(n) * obj;
  }
  return total;
}

Trainer::Trainer(Model& model, const Dataset& train, const TrainConfig& cfg)
    : model_(model), train_(train), cfg_(cfg), rng_(cfg.seed) {
  validate(cfg, train.size());
  if (train.dim() != model.spec.input_dim) {
    throw ShapeError("train: model expects " + std::to_string(model.spec.input_dim) +
                     " inputs, data has " + std::to_string(train.dim()));
  }
}

double Trainer::run_epoch() {
  const std::size_t n = train_.size();
  ++epoch_;
  // The exact GP objective uses all data; one full step per epoch.
  const bool full = model_.spec.kind == ModelKind::exact;
  const std::vector<std::size_t> order = full ? identity(n) : permutation(n, rng_);
  const std::size_t bs = full ? n : cfg_.batch_size;
  double sum = 0.0;
  std::size_t steps = 0;
  for (std::size_t start = 0; start < n; start += bs, ++steps) {
    const std::size_t end = std::min(n, start + bs);
    try {
      ad::Tape tape;
      auto vars = model_.params.bind(tape, model_.frozen);
      ad::Var obj = model_objective(model_, vars, gather_rows(train_.X, order, start, end),
                                    gather(train_.y, order, start, end), n);
      const double value = obj.value().item();
      std::map<std::string, Tensor> grads = tape.backward(obj).by_name();
      for (const auto& [name, g] : grads)
        for (double v : g.data())
          if (!std::isfinite(v)) throw NumericError("non-finite gradient for parameter '" + name + "'");
      const double norm = clip_global_norm(grads, cfg_.clip_norm);
      if (cfg_.clip_norm > 0.0 && norm > cfg_.clip_norm) {
        log::debug("epoch " + std::to_string(epoch_) + ", step " + std::to_string(steps + 1) +
                   ": gradient norm " + std::to_string(norm) + " clipped");
      }
      adam_step(model_.params, grads, adam_, cfg_);
      sum += value;
    } catch (const NumericError& e) {
      throw NumericError("epoch " + std::to_string(epoch_) + ", step " + std::to_string(steps + 1) +
                         ": " + e.what());
    }
  }
  return sum / double(steps);
}

std::vector<MetricRecord> train(Model& model, const Dataset& train_data, const Dataset* test,
                                const TrainConfig& cfg, const MetricSink& sink) {
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  Trainer trainer(model, train_data, cfg);
  std::vector<MetricRecord> records;

  auto emit = [&](std::size_t epoch, double elbo) {
    MetricRecord r;
    r.epoch = epoch;
    r.elbo = elbo;
    const Evaluation e = test ? evaluate(model, *test) : evaluate(PredictiveDistribution{}, model, Dataset{});
    r.nll = e.nll;
    r.rmse_or_error = e.rmse_or_error;
    r.wall_seconds = std::chrono::duration<double>(clock::now() - t0).count();
    if (!records.empty()) r.wall_seconds = std::max(r.wall_seconds, records.back().wall_seconds);
    records.push_back(r);
    if (sink) sink(r);
    log::debug("epoch " + std::to_string(epoch) + ": objective " + std::to_string(elbo));
  };

  double initial = 0.0;
  try {
    initial = full_objective(model, train_data);
  } catch (const NumericError& e) {
    throw NumericError(std::string("epoch 0 (initial objective): ") + e.what());
  }
  emit(0, initial);
  for (std::size_t e = 1; e <= cfg.max_epochs; ++e) {
    const double elbo = trainer.run_epoch();
    if (e % cfg.eval_every == 0 || e == cfg.max_epochs) emit(e, elbo);
  }
  return records;
}

std::string to_json_line(const MetricRecord& r) {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  nlohmann::ordered_json j;
  j["epoch"] = r.epoch;
  j["wall_seconds"] = num(r.wall_seconds);
  j["elbo"] = num(r.elbo);
  j["nll"] = num(r.nll);
  j["rmse_or_error"] = num(r.rmse_or_error);
  return j.dump();
}

MetricLog::MetricLog(const std::string& path) : out_(path, std::ios::trunc) {
  if (!out_) throw DataError("cannot write metric log '" + path + "'");
}

void MetricLog::write(const MetricRecord& record) {
  out_ << to_json_line(record) << '\n';
  out_.flush();
}

}  // namespace idsgp
