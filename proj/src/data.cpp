#include "idsgp/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

#include "idsgp/errors.hpp"
#include "idsgp/log.hpp"
#include "idsgp/random.hpp"

namespace idsgp {

std::string to_string(Task task) { return task == Task::regression ? "regression" : "binary"; }

Task parse_task(const std::string& text) {
  if (text == "regression") return Task::regression;
  if (text == "binary") return Task::binary;
  throw ConfigError("data.task", "unknown task '" + text + "' (expected regression or binary)");
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(std::string_view(line).substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

bool parse_double(const std::string& field, double& out) {
  if (field.empty()) return false;
  const char* first = field.data();
  if (*first == '+') ++first;
  const char* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last && std::isfinite(out);
}

std::size_t resolve_target(const std::string& target, const std::vector<std::string>& header,
                           const std::string& source) {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == target) return i;
  long idx = 0;
  auto [ptr, ec] = std::from_chars(target.data(), target.data() + target.size(), idx);
  if (ec == std::errc() && ptr == target.data() + target.size()) {
    const long n = long(header.size());
    if (idx < 0) idx += n;
    if (idx >= 0 && idx < n) return std::size_t(idx);
  }
  throw DataError(source + ": target column '" + target + "' not found in header");
}

}  // namespace

CsvTable parse_csv_table(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  CsvTable table;
  while (table.header.empty() && std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) table.header = split_fields(line);
  }
  if (table.header.empty()) throw DataError(source + ": missing header row");
  const std::size_t cols = table.header.size();

  std::vector<double> values;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::vector<std::string> fields = split_fields(line);
    if (fields.size() != cols) {
      throw DataError(source + ": row " + std::to_string(line_no) + " has " +
                      std::to_string(fields.size()) + " fields, header has " + std::to_string(cols));
    }
    for (std::size_t c = 0; c < cols; ++c) {
      double v = 0.0;
      if (!parse_double(fields[c], v)) {
        throw DataError(source + ": row " + std::to_string(line_no) + ", column " +
                        std::to_string(c + 1) + " ('" + table.header[c] + "'): cannot parse '" +
                        fields[c] + "' as a number");
      }
      values.push_back(v);
    }
    ++rows;
  }
  table.values = Tensor(Shape{rows, cols}, std::move(values));
  return table;
}

CsvTable read_csv_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open data file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv_table(buf.str(), path);
}

Dataset parse_csv(const std::string& text, Task task, const std::string& target,
                  const std::string& source) {
  const CsvTable table = parse_csv_table(text, source);
  const std::vector<std::string>& header = table.header;
  const std::size_t cols = header.size();
  if (cols < 2) throw DataError(source + ": need at least one input column and a target column");
  const std::size_t tcol = resolve_target(target, header, source);
  const std::size_t rows = table.values.dim(0);
  const std::span<const double> values = table.values.data();

  // Keep non-constant input columns.
  std::vector<std::size_t> keep;
  Dataset data;
  data.task = task;
  data.target_name = header[tcol];
  for (std::size_t c = 0; c < cols; ++c) {
    if (c == tcol) continue;
    bool constant = true;
    for (std::size_t r = 1; r < rows && constant; ++r) constant = values[r * cols + c] == values[c];
    if (constant && rows > 0) {
      log::warn(source + ": dropping constant column '" + header[c] + "'");
      continue;
    }
    keep.push_back(c);
    data.feature_names.push_back(header[c]);
  }
  if (keep.empty()) throw DataError(source + ": no non-constant input columns");

  data.X = Tensor(Shape{rows, keep.size()});
  data.y = Tensor(Shape{rows});
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t k = 0; k < keep.size(); ++k) data.X(r, k) = values[r * cols + keep[k]];
    double t = values[r * cols + tcol];
    if (task == Task::binary) {
      if (t != 0.0 && t != 1.0) {
        std::ostringstream os;
        os << source << ": row " << r + 2 << ": binary label " << t << " is not 0 or 1";
        throw DataError(os.str());
      }
      t = t == 1.0 ? 1.0 : -1.0;
    }
    data.y[r] = t;
  }
  data.stats.x_mean.assign(keep.size(), 0.0);
  data.stats.x_std.assign(keep.size(), 1.0);
  return data;
}

Dataset load_csv(const std::string& path, Task task, const std::string& target) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open data file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str(), task, target, path);
}


void write_csv(const Dataset& data, const std::string& path) {
  const Dataset raw = data.standardized ? destandardize(data) : data;
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << std::setprecision(17);
  for (std::size_t c = 0; c < raw.dim(); ++c) {
    out << (c < raw.feature_names.size() ? raw.feature_names[c] : "x" + std::to_string(c)) << ',';
  }
  out << raw.target_name << '\n';
  for (std::size_t r = 0; r < raw.size(); ++r) {
    for (std::size_t c = 0; c < raw.dim(); ++c) out << raw.X(r, c) << ',';
    if (raw.task == Task::binary) out << (raw.y[r] > 0 ? 1 : 0) << '\n';
    else out << raw.y[r] << '\n';
  }
  if (!out) throw DataError("failed writing '" + path + "'");
}

Standardization compute_standardization(const Dataset& raw) {
  const std::size_t n = raw.size(), d = raw.dim();
  Standardization s;
  s.x_mean.assign(d, 0.0);
  s.x_std.assign(d, 1.0);
  if (n == 0) return s;
  for (std::size_t c = 0; c < d; ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < n; ++r) mean += raw.X(r, c);
    mean /= double(n);
    double ss = 0.0;
    for (std::size_t r = 0; r < n; ++r) ss += (raw.X(r, c) - mean) * (raw.X(r, c) - mean);
    const double sd = std::sqrt(ss / double(n));
    s.x_mean[c] = mean;
    s.x_std[c] = sd > 0.0 ? sd : 1.0;
  }
  if (raw.task == Task::regression) {
    double mean = 0.0;
    for (std::size_t r = 0; r < n; ++r) mean += raw.y[r];
    mean /= double(n);
    double ss = 0.0;
    for (std::size_t r = 0; r < n; ++r) ss += (raw.y[r] - mean) * (raw.y[r] - mean);
    const double sd = std::sqrt(ss / double(n));
    s.y_mean = mean;
    s.y_std = sd > 0.0 ? sd : 1.0;
  }
  return s;
}

Dataset standardize(const Dataset& raw, const Standardization& stats) {
  if (raw.standardized) throw DataError("standardize: dataset is already standardized");
  if (stats.x_mean.size() != raw.dim()) {
    throw ShapeError("standardize: statistics for " + std::to_string(stats.x_mean.size()) +
                     " inputs, data has " + std::to_string(raw.dim()));
  }
  Dataset out = raw;
  for (std::size_t r = 0; r < raw.size(); ++r)
    for (std::size_t c = 0; c < raw.dim(); ++c)
      out.X(r, c) = (raw.X(r, c) - stats.x_mean[c]) / stats.x_std[c];
  if (raw.task == Task::regression)
    for (std::size_t r = 0; r < raw.size(); ++r) out.y[r] = (raw.y[r] - stats.y_mean) / stats.y_std;
  out.stats = stats;
  out.standardized = true;
  return out;
}

Dataset destandardize(const Dataset& data) {
  Dataset out = data;
  if (!data.standardized) return out;
  const Standardization& s = data.stats;
  for (std::size_t r = 0; r < data.size(); ++r)
    for (std::size_t c = 0; c < data.dim(); ++c) out.X(r, c) = data.X(r, c) * s.x_std[c] + s.x_mean[c];
  if (data.task == Task::regression)
    for (std::size_t r = 0; r < data.size(); ++r) out.y[r] = data.y[r] * s.y_std + s.y_mean;
  out.stats = Standardization{};
  out.stats.x_mean.assign(data.dim(), 0.0);
  out.stats.x_std.assign(data.dim(), 1.0);
  out.standardized = false;
  return out;
}

Dataset take_rows(const Dataset& data, const std::vector<std::size_t>& rows) {
  Dataset out = data;
  const std::size_t d = data.dim();
  out.X = Tensor(Shape{rows.size(), d});
  out.y = Tensor(Shape{rows.size()});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t c = 0; c < d; ++c) out.X(i, c) = data.X(rows[i], c);
    out.y[i] = data.y[rows[i]];
  }
  return out;
}

Split split(const Dataset& raw, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw ConfigError("data.train_fraction", "train fraction must lie strictly between 0 and 1");
  }
  const std::size_t n = raw.size();
  if (n < 2) throw DataError("split: need at least two rows");
  Rng rng(seed);
  const std::vector<std::size_t> perm = permutation(n, rng);
  std::size_t n_train = std::size_t(std::llround(fraction * double(n)));
  n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
  Split s;
  s.train_index.assign(perm.begin(), perm.begin() + std::ptrdiff_t(n_train));
  s.test_index.assign(perm.begin() + std::ptrdiff_t(n_train), perm.end());
  const Dataset train_raw = take_rows(raw, s.train_index);
  const Standardization stats = compute_standardization(train_raw);
  s.train = standardize(train_raw, stats);
  s.test = standardize(take_rows(raw, s.test_index), stats);
  return s;
}

std::string to_string(ToyKind kind) {
  switch (kind) {
    case ToyKind::snelson1d: return "snelson1d";
    case ToyKind::banana: return "banana";
    case ToyKind::synth: return "synth";
  }
  return "unknown";
}

ToyKind parse_toy_kind(const std::string& text) {
  if (text == "snelson1d") return ToyKind::snelson1d;
  if (text == "banana") return ToyKind::banana;
  if (text == "synth") return ToyKind::synth;
  throw ConfigError("data.toy", "unknown toy data set '" + text + "' (expected snelson1d, banana or synth)");
}

std::size_t default_toy_size(ToyKind kind) {
  switch (kind) {
    case ToyKind::snelson1d: return 200;
    case ToyKind::banana: return 5300;
    case ToyKind::synth: return 5000;
  }
  return 0;
}

Dataset make_toy(ToyKind kind, std::size_t n, std::uint64_t seed, std::size_t dim) {
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Dataset data;
  switch (kind) {
    case ToyKind::snelson1d: {
      // Inputs on [0, 6] with no data in (2.4, 3.6).
      data.task = Task::regression;
      data.X = Tensor(Shape{n, 1});
      data.y = Tensor(Shape{n});
      for (std::size_t i = 0; i < n; ++i) {
        double x = 4.8 * unit(rng);
        if (x > 2.4) x += 1.2;
        const double f = std::sin(1.6 * x) + 0.4 * std::sin(4.3 * x + 0.5);
        data.X(i, 0) = x;
        data.y[i] = f + 0.2 * normal(rng);
      }
      data.feature_names = {"x"};
      break;
    }
    case ToyKind::banana: {
      // Two crescents; label 1 on the upper arc.
      data.task = Task::binary;
      data.X = Tensor(Shape{n, 2});
      data.y = Tensor(Shape{n});
      const double pi = std::acos(-1.0);
      for (std::size_t i = 0; i < n; ++i) {
        const bool upper = i % 2 == 0;
        const double t = pi * unit(rng);
        const double x0 = upper ? std::cos(t) : 1.0 - std::cos(t);
        const double x1 = upper ? std::sin(t) : 0.5 - std::sin(t);
        data.X(i, 0) = x0 + 0.25 * normal(rng);
        data.X(i, 1) = x1 + 0.25 * normal(rng);
        data.y[i] = upper ? 1.0 : -1.0;
      }
      data.feature_names = {"x0", "x1"};
      break;
    }
    case ToyKind::synth: {
      if (dim == 0) throw ConfigError("data.d", "synthetic data needs at least one dimension");
      data.task = Task::regression;
      data.X = Tensor(Shape{n, dim});
      data.y = Tensor(Shape{n});
      for (std::size_t i = 0; i < n; ++i) {
        double f = 0.0;
        for (std::size_t c = 0; c < dim; ++c) {
          const double x = normal(rng);
          data.X(i, c) = x;
          f += std::sin((1.0 + 0.25 * double(c % 4)) * x) / std::sqrt(double(dim));
        }
        if (dim > 1) f += 0.5 * data.X(i, 0) * data.X(i, 1);
        data.y[i] = f + 0.1 * normal(rng);
      }
      for (std::size_t c = 0; c < dim; ++c) data.feature_names.push_back("x" + std::to_string(c));
      break;
    }
  }
  data.stats.x_mean.assign(data.dim(), 0.0);
  data.stats.x_std.assign(data.dim(), 1.0);
  return data;
}

}  // namespace idsgp
