#include "idsgp/experiment.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "idsgp/errors.hpp"
#include "idsgp/log.hpp"

namespace idsgp {

namespace fs = std::filesystem;

namespace {

using clock = std::chrono::steady_clock;

double seconds_since(clock::time_point t0) {
  return std::chrono::duration<double>(clock::now() - t0).count();
}

Tensor standardize_inputs(const Tensor& X_raw, const Standardization& s) {
  Tensor X = X_raw;
  for (std::size_t r = 0; r < X.dim(0); ++r)
    for (std::size_t c = 0; c < X.dim(1); ++c) X(r, c) = (X_raw(r, c) - s.x_mean[c]) / s.x_std[c];
  return X;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << std::setprecision(17);
  return out;
}

void write_table(const fs::path& path, const std::vector<std::string>& header, const Tensor& values) {
  std::ofstream out = open_out(path);
  for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
  out << '\n';
  for (std::size_t r = 0; r < values.dim(0); ++r) {
    for (std::size_t c = 0; c < values.dim(1); ++c) out << (c ? "," : "") << values(r, c);
    out << '\n';
  }
}

/// Picks the checkpoint's input columns out of a table.
Tensor select_inputs(const CsvTable& table, const Checkpoint& ckpt, const std::string& source) {
  const std::size_t d = ckpt.model.spec.input_dim;
  std::vector<std::size_t> cols;
  for (const std::string& name : ckpt.feature_names) {
    for (std::size_t c = 0; c < table.header.size(); ++c) {
      if (table.header[c] == name) {
        cols.push_back(c);
        break;
      }
    }
  }
  if (cols.size() != d || ckpt.feature_names.size() != d) {
    cols.clear();
    if (table.header.size() != d) {
      throw ShapeError(source + ": the model expects d=" + std::to_string(d) +
                       " input columns, the file has " + std::to_string(table.header.size()));
    }
    for (std::size_t c = 0; c < d; ++c) cols.push_back(c);
  }
  const std::size_t n = table.values.dim(0);
  Tensor X(Shape{n, d});
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t k = 0; k < d; ++k) X(r, k) = table.values(r, cols[k]);
  return X;
}

Checkpoint make_checkpoint(const Model& model, const ExperimentData& data, const Config& config,
                           std::size_t epochs) {
  Checkpoint c;
  c.model = model;
  c.task = data.raw.task;
  c.stats = data.split.train.stats;
  c.feature_names = data.raw.feature_names;
  c.target_name = data.raw.target_name;
  c.epochs = epochs;
  c.config = config.echo();
  return c;
}

void write_grid(const fs::path& path, const Checkpoint& ckpt, const Dataset& raw, const PlotConfig& plot) {
  const std::size_t d = raw.dim();
  std::vector<double> lo(d), hi(d);
  for (std::size_t c = 0; c < d; ++c) {
    double mn = raw.X(0, c), mx = raw.X(0, c);
    for (std::size_t r = 1; r < raw.size(); ++r) {
      mn = std::min(mn, raw.X(r, c));
      mx = std::max(mx, raw.X(r, c));
    }
    const double pad = 0.1 * (mx - mn);
    lo[c] = mn - pad;
    hi[c] = mx + pad;
  }
  Tensor grid;
  if (d == 1) {
    const std::size_t g = plot.grid_points;
    grid = Tensor(Shape{g, 1});
    for (std::size_t i = 0; i < g; ++i) grid(i, 0) = lo[0] + (hi[0] - lo[0]) * double(i) / double(g - 1);
  } else {
    const std::size_t g = plot.grid_side;
    grid = Tensor(Shape{g * g, 2});
    for (std::size_t i = 0; i < g; ++i) {
      for (std::size_t j = 0; j < g; ++j) {
        grid(i * g + j, 0) = lo[0] + (hi[0] - lo[0]) * double(i) / double(g - 1);
        grid(i * g + j, 1) = lo[1] + (hi[1] - lo[1]) * double(j) / double(g - 1);
      }
    }
  }
  const PredictionTable p = predict_table(ckpt, grid);
  std::vector<std::string> header = raw.feature_names;
  header.insert(header.end(), p.header.begin(), p.header.end());
  Tensor out(Shape{grid.dim(0), d + p.header.size()});
  for (std::size_t r = 0; r < grid.dim(0); ++r) {
    for (std::size_t c = 0; c < d; ++c) out(r, c) = grid(r, c);
    for (std::size_t c = 0; c < p.header.size(); ++c) out(r, d + c) = p.values(r, c);
  }
  write_table(path, header, out);
}

void write_inducing(const fs::path& path, const Checkpoint& ckpt, const Dataset& train_raw,
                    const PlotConfig& plot) {
  const Model& model = ckpt.model;
  const std::size_t d = model.spec.input_dim;
  const Standardization& s = ckpt.stats;
  std::vector<double> probe = plot.probe;
  if (probe.empty()) {
    probe.assign(d, 0.0);
    for (std::size_t c = 0; c < d; ++c) {
      for (std::size_t r = 0; r < train_raw.size(); ++r) probe[c] += train_raw.X(r, c);
      probe[c] /= double(train_raw.size());
    }
  }
  if (probe.size() != d) {
    throw ConfigError("plot.probe", "plot.probe has " + std::to_string(probe.size()) +
                                        " values, the inputs have " + std::to_string(d));
  }
  VariationalState q;
  if (model.spec.kind == ModelKind::idsgp) {
    Tensor x(Shape{1, d});
    for (std::size_t c = 0; c < d; ++c) x(0, c) = (probe[c] - s.x_mean[c]) / s.x_std[c];
    q = amort_forward(model.net(), x);
  } else {
    q = model.variational_state();
  }
  const std::size_t M = model.spec.num_inducing;
  const bool regression = ckpt.task == Task::regression;
  std::ofstream out = open_out(path);
  out << "role";
  for (const std::string& name : ckpt.feature_names) out << ',' << name;
  out << ",u_mean\n";
  if (model.spec.kind == ModelKind::idsgp) {
    out << "probe";
    for (double v : probe) out << ',' << v;
    out << ",\n";
  }
  for (std::size_t i = 0; i < M; ++i) {
    out << "inducing";
    for (std::size_t c = 0; c < d; ++c) out << ',' << q.Z(i, c) * s.x_std[c] + s.x_mean[c];
    const double m = q.m[i];
    out << ',' << (regression ? m * s.y_std + s.y_mean : m) << '\n';
  }
}

}  // namespace

ExperimentData load_experiment_data(const ExperimentConfig& cfg) {
  ExperimentData d;
  if (!cfg.data.toy.empty()) {
    const ToyKind kind = parse_toy_kind(cfg.data.toy);
    const std::size_t n = cfg.data.n ? cfg.data.n : default_toy_size(kind);
    d.raw = make_toy(kind, n, cfg.data.seed, cfg.data.dim);
  } else if (!cfg.data.path.empty()) {
    d.raw = load_csv(cfg.data.path, cfg.data.task, cfg.data.target);
  } else {
    throw ConfigError("data.path", "no data source: set data.path (a CSV file) or data.toy");
  }
  d.split = split(d.raw, cfg.data.train_fraction, cfg.data.seed);
  return d;
}

TrainRun run_train(const Config& config) {
  const ExperimentConfig cfg = resolve(config);
  const ExperimentData data = load_experiment_data(cfg);
  ModelSpec spec = cfg.model;
  spec.input_dim = data.raw.dim();
  validate(cfg.train, data.split.train.size());

  const fs::path dir(cfg.output_dir);
  fs::create_directories(dir);
  TrainRun run;
  auto record_file = [&](const fs::path& p) { run.files.push_back(p.string()); };

  {
    std::ofstream echo = open_out(dir / "config.txt");
    echo << config.echo();
    record_file(dir / "config.txt");
  }
  write_csv(take_rows(data.raw, data.split.train_index), (dir / "train.csv").string());
  write_csv(take_rows(data.raw, data.split.test_index), (dir / "test.csv").string());
  record_file(dir / "train.csv");
  record_file(dir / "test.csv");

  log::info("training " + to_string(spec.kind) + " (M=" + std::to_string(spec.num_inducing) +
            ") on " + std::to_string(data.split.train.size()) + " rows, d=" +
            std::to_string(spec.input_dim) + ", " + std::to_string(cfg.train.max_epochs) + " epochs");
  Model model = init_model(spec, data.split.train.X, data.split.train.y, cfg.train.seed);
  MetricLog metrics((dir / "metrics.jsonl").string());
  record_file(dir / "metrics.jsonl");
  run.records = train(model, data.split.train, &data.split.test, cfg.train, [&](const MetricRecord& r) {
    metrics.write(r);
    std::ostringstream msg;
    msg << "epoch " << r.epoch << "  elbo " << r.elbo << "  test nll " << r.nll << "  test "
        << (data.raw.task == Task::regression ? "rmse " : "error ") << r.rmse_or_error;
    log::info(msg.str());
  });

  run.checkpoint = make_checkpoint(model, data, config, cfg.train.max_epochs);
  save_checkpoint(run.checkpoint, (dir / "checkpoint.json").string());
  record_file(dir / "checkpoint.json");

  if (cfg.plot.enabled && spec.input_dim <= 2) {
    write_grid(dir / "grid.csv", run.checkpoint, data.raw, cfg.plot);
    record_file(dir / "grid.csv");
    if (spec.kind != ModelKind::exact) {
      write_inducing(dir / "inducing.csv", run.checkpoint, take_rows(data.raw, data.split.train_index),
                     cfg.plot);
      record_file(dir / "inducing.csv");
    }
  }
  return run;
}

PredictionTable predict_table(const Checkpoint& ckpt, const Tensor& X_raw, bool standardized_scale) {
  const std::size_t d = ckpt.model.spec.input_dim;
  if (X_raw.rank() != 2 || X_raw.dim(1) != d) {
    throw ShapeError("predict: the model expects d=" + std::to_string(d) + " input columns");
  }
  const Tensor X = standardize_inputs(X_raw, ckpt.stats);
  const PredictiveDistribution p = predict(ckpt.model, X);
  if (p.clamped > 0) {
    log::warn("predict: " + std::to_string(p.clamped) + " negative variances clamped to 0 (min " +
              std::to_string(p.min_raw_variance) + ")");
  }
  const std::size_t n = X.dim(0);
  PredictionTable t;
  t.values = Tensor(Shape{n, 3});
  if (ckpt.task == Task::regression) {
    t.header = {"mean", "std", "y_std"};
    const double noise = std::exp(ckpt.model.hyper().likelihood.log_noise);
    const double scale = standardized_scale ? 1.0 : ckpt.stats.y_std;
    const double shift = standardized_scale ? 0.0 : ckpt.stats.y_mean;
    for (std::size_t i = 0; i < n; ++i) {
      t.values(i, 0) = p.mean[i] * scale + shift;
      t.values(i, 1) = std::sqrt(p.variance[i]) * scale;
      t.values(i, 2) = std::sqrt(p.variance[i] + noise) * scale;
    }
  } else {
    t.header = {"mean", "std", "p1"};
    for (std::size_t i = 0; i < n; ++i) {
      t.values(i, 0) = p.mean[i];
      t.values(i, 1) = std::sqrt(p.variance[i]);
      t.values(i, 2) = probit_class_probability(p.mean[i], p.variance[i]);
    }
  }
  return t;
}

void run_predict(const std::string& checkpoint_path, const std::string& input_csv,
                 const std::string& output_csv, bool standardized_scale) {
  const Checkpoint ckpt = load_checkpoint(checkpoint_path);
  const CsvTable table = read_csv_table(input_csv);
  const Tensor X = select_inputs(table, ckpt, input_csv);
  const PredictionTable p = predict_table(ckpt, X, standardized_scale);
  write_table(output_csv, p.header, p.values);
}

Evaluation run_eval(const std::string& checkpoint_path, const Config& config, const std::string& data_csv) {
  const Checkpoint ckpt = load_checkpoint(checkpoint_path);
  Dataset test_raw;
  if (data_csv.empty()) {
    const ExperimentData data = load_experiment_data(resolve(config));
    test_raw = take_rows(data.raw, data.split.test_index);
  } else {
    const CsvTable table = read_csv_table(data_csv);
    test_raw.task = ckpt.task;
    test_raw.X = select_inputs(table, ckpt, data_csv);
    test_raw.feature_names = ckpt.feature_names;
    std::size_t tcol = table.header.size();
    for (std::size_t c = 0; c < table.header.size(); ++c)
      if (table.header[c] == ckpt.target_name) tcol = c;
    if (tcol == table.header.size()) {
      throw DataError(data_csv + ": target column '" + ckpt.target_name + "' not found");
    }
    const std::size_t n = table.values.dim(0);
    test_raw.y = Tensor(Shape{n});
    for (std::size_t r = 0; r < n; ++r) {
      double t = table.values(r, tcol);
      if (ckpt.task == Task::binary) {
        if (t != 0.0 && t != 1.0) throw DataError(data_csv + ": binary label is not 0 or 1");
        t = t == 1.0 ? 1.0 : -1.0;
      }
      test_raw.y[r] = t;
    }
  }
  if (test_raw.dim() != ckpt.model.spec.input_dim) {
    throw ShapeError("eval: the model expects d=" + std::to_string(ckpt.model.spec.input_dim) +
                     " inputs, the data has " + std::to_string(test_raw.dim()));
  }
  return evaluate(ckpt.model, standardize(test_raw, ckpt.stats));
}

std::vector<BenchRow> run_benchmark(const std::vector<std::pair<std::string, Config>>& configs) {
  std::vector<BenchRow> rows;
  for (const auto& [name, config] : configs) {
    const ExperimentConfig cfg = resolve(config);
    const ExperimentData data = load_experiment_data(cfg);
    const Dataset train_set = standardize(data.raw, compute_standardization(data.raw));
    validate(cfg.train, train_set.size());
    BenchRow row;
    row.name = name;
    row.spec = cfg.model;
    row.spec.input_dim = train_set.dim();
    row.n_train = train_set.size();
    row.repeats = cfg.bench.repeats;

    Tensor Xp(Shape{cfg.bench.predict_points, train_set.dim()});
    for (std::size_t r = 0; r < Xp.dim(0); ++r)
      for (std::size_t c = 0; c < Xp.dim(1); ++c) Xp(r, c) = train_set.X(r % train_set.size(), c);

    std::vector<double> epoch_means, predict_times;
    for (std::size_t rep = 0; rep < cfg.bench.repeats; ++rep) {
      TrainConfig tc = cfg.train;
      tc.seed = cfg.train.seed + rep;
      Model model = init_model(row.spec, train_set.X, train_set.y, tc.seed);
      Trainer trainer(model, train_set, tc);
      for (std::size_t e = 0; e < cfg.bench.warmup_epochs; ++e) trainer.run_epoch();
      double total = 0.0;
      for (std::size_t e = 0; e < cfg.bench.timed_epochs; ++e) {
        const auto t0 = clock::now();
        trainer.run_epoch();
        total += seconds_since(t0);
      }
      epoch_means.push_back(total / double(cfg.bench.timed_epochs));
      const auto t0 = clock::now();
      const PredictiveDistribution p = predict(model, Xp);
      predict_times.push_back(seconds_since(t0));
      if (p.mean.numel() != Xp.dim(0)) throw std::logic_error("benchmark: prediction size mismatch");
      log::info(name + " repeat " + std::to_string(rep + 1) + ": epoch " +
                std::to_string(epoch_means.back()) + " s, predict " +
                std::to_string(predict_times.back()) + " s");
    }
    auto mean_se = [](const std::vector<double>& v) {
      double mean = 0.0;
      for (double x : v) mean += x;
      mean /= double(v.size());
      if (v.size() < 2) return std::pair{mean, 0.0};
      double ss = 0.0;
      for (double x : v) ss += (x - mean) * (x - mean);
      return std::pair{mean, std::sqrt(ss / double(v.size() - 1) / double(v.size()))};
    };
    std::tie(row.epoch_mean, row.epoch_se) = mean_se(epoch_means);
    std::tie(row.predict_mean, row.predict_se) = mean_se(predict_times);
    rows.push_back(row);
  }
  return rows;
}

std::string format_benchmark(const std::vector<BenchRow>& rows) {
  std::ostringstream out;
  out << "config,model,num_inducing,hidden,n_train,repeats,epoch_seconds_mean,epoch_seconds_se,"
         "predict_seconds_mean,predict_seconds_se\n";
  out << std::setprecision(6);
  for (const BenchRow& r : rows) {
    std::string hidden;
    if (r.spec.kind == ModelKind::idsgp) {
      for (std::size_t w : r.spec.hidden) hidden += (hidden.empty() ? "" : "x") + std::to_string(w);
    }
    out << r.name << ',' << to_string(r.spec.kind) << ',' << r.spec.num_inducing << ','
        << (hidden.empty() ? "-" : hidden) << ',' << r.n_train << ',' << r.repeats << ','
        << r.epoch_mean << ',' << r.epoch_se << ',' << r.predict_mean << ',' << r.predict_se << '\n';
  }
  return out.str();
}

void run_make_data(const Config& config, const std::string& output_csv) {
  const ExperimentConfig cfg = resolve(config);
  if (cfg.data.toy.empty()) throw ConfigError("data.toy", "make-data needs data.toy (snelson1d, banana or synth)");
  const ToyKind kind = parse_toy_kind(cfg.data.toy);
  const std::size_t n = cfg.data.n ? cfg.data.n : default_toy_size(kind);
  write_csv(make_toy(kind, n, cfg.data.seed, cfg.data.dim), output_csv);
}

}  // namespace idsgp
