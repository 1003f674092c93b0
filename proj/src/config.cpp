#include "idsgp/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "idsgp/errors.hpp"

namespace idsgp {

namespace {

struct KeyInfo {
  const char* key;
  const char* value;
  const char* help;
};

// Sorted by key; the echo follows the same order.
const KeyInfo kKeys[] = {
    {"bench.predict_points", "10000", "test points per timed prediction pass"},
    {"bench.repeats", "1", "independent repeats per benchmark row"},
    {"bench.timed_epochs", "5", "timed training epochs per repeat"},
    {"bench.warmup_epochs", "1", "untimed epochs before timing"},
    {"data.d", "8", "input dimension of the synth toy"},
    {"data.n", "0", "toy size (0: the toy's default)"},
    {"data.path", "", "CSV file with a header row"},
    {"data.seed", "-1", "seed for toy generation and the split (-1: train.seed)"},
    {"data.target", "-1", "target column name or index (negative counts from the end)"},
    {"data.task", "regression", "regression | binary (toys set their own)"},
    {"data.toy", "", "snelson1d | banana | synth"},
    {"data.train_fraction", "0.8", "fraction of rows used for training"},
    {"model.ard", "false", "one lengthscale per input dimension"},
    {"model.freeze_inducing", "false", "keep the VSGP inducing inputs fixed"},
    {"model.jitter", "1e-6", "first non-zero Cholesky jitter, relative to the mean diagonal"},
    {"model.jitter_cap", "1e-2", "largest Cholesky jitter, relative to the mean diagonal"},
    {"model.kernel", "matern32", "matern32 | rbf"},
    {"model.kind", "idsgp", "idsgp | vsgp | exact"},
    {"model.layers", "2", "hidden layers of the amortization network"},
    {"model.likelihood", "auto", "gaussian | probit | auto (from the task)"},
    {"model.num_inducing", "2", "inducing points M (per input for idsgp)"},
    {"model.quadrature_nodes", "64", "Gauss-Hermite nodes for the probit expectation"},
    {"model.width", "50", "units per hidden layer"},
    {"output.dir", "out", "directory for run artifacts"},
    {"plot.enabled", "true", "write grid files for inputs of dimension 1 or 2"},
    {"plot.grid_points", "200", "grid size for 1-D inputs"},
    {"plot.grid_side", "60", "points per axis for 2-D inputs"},
    {"plot.probe", "", "comma-separated probe input for the inducing-point file (default: input mean)"},
    {"train.batch_size", "100", "mini-batch size n"},
    {"train.beta1", "0.9", "ADAM first-moment decay"},
    {"train.beta2", "0.999", "ADAM second-moment decay"},
    {"train.clip_norm", "100", "global gradient-norm cap (0: off)"},
    {"train.epochs", "100", "training epochs"},
    {"train.epsilon", "1e-8", "ADAM epsilon"},
    {"train.eval_every", "10", "epochs between metric records"},
    {"train.lr", "0.01", "ADAM learning rate"},
    {"train.seed", "0", "seed for initialization and shuffling"},
};

struct Preset {
  const char* name;
  std::vector<std::pair<const char*, const char*>> values;
};

const std::vector<Preset>& presets() {
  static const std::vector<Preset> table = {
      {"snelson-idsgp",
       {{"data.toy", "snelson1d"}, {"model.kind", "idsgp"}, {"model.num_inducing", "2"},
        {"model.layers", "2"}, {"model.width", "50"}, {"train.lr", "0.01"},
        {"train.batch_size", "100"}, {"train.epochs", "2000"}, {"train.eval_every", "50"}}},
      {"snelson-vsgp",
       {{"data.toy", "snelson1d"}, {"model.kind", "vsgp"}, {"model.num_inducing", "4"},
        {"train.lr", "0.01"}, {"train.batch_size", "100"}, {"train.epochs", "2000"},
        {"train.eval_every", "50"}}},
      {"snelson-exact",
       {{"data.toy", "snelson1d"}, {"model.kind", "exact"}, {"train.lr", "0.01"},
        {"train.epochs", "1000"}, {"train.eval_every", "50"}}},
      {"banana-idsgp",
       {{"data.toy", "banana"}, {"model.kind", "idsgp"}, {"model.num_inducing", "2"},
        {"model.layers", "2"}, {"model.width", "50"}, {"train.lr", "0.01"},
        {"train.batch_size", "100"}, {"train.epochs", "40"}, {"train.eval_every", "5"}}},
      {"banana-vsgp",
       {{"data.toy", "banana"}, {"model.kind", "vsgp"}, {"model.num_inducing", "4"},
        {"train.lr", "0.01"}, {"train.batch_size", "100"}, {"train.epochs", "40"},
        {"train.eval_every", "5"}}},
      {"bench-idsgp",
       {{"data.toy", "synth"}, {"data.n", "5000"}, {"data.d", "8"}, {"model.kind", "idsgp"},
        {"model.num_inducing", "8"}, {"model.layers", "1"}, {"model.width", "50"},
        {"train.lr", "0.01"}, {"train.batch_size", "100"}}},
      {"bench-vsgp",
       {{"data.toy", "synth"}, {"data.n", "5000"}, {"data.d", "8"}, {"model.kind", "vsgp"},
        {"model.num_inducing", "128"}, {"train.lr", "0.01"}, {"train.batch_size", "100"}}},
  };
  return table;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const Config& c, const std::string& key) {
  const std::string& text = c.get(key);
  T value{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (text.empty() || ec != std::errc() || ptr != last) {
    throw ConfigError(key, key + ": cannot parse '" + text + "' as a number");
  }
  return value;
}

double get_double(const Config& c, const std::string& key) {
  const double v = parse_number<double>(c, key);
  if (!std::isfinite(v)) throw ConfigError(key, key + ": value must be finite");
  return v;
}

std::size_t get_count(const Config& c, const std::string& key, std::size_t min_value = 0) {
  const long v = parse_number<long>(c, key);
  if (v < long(min_value)) {
    throw ConfigError(key, key + ": must be an integer ≥ " + std::to_string(min_value));
  }
  return std::size_t(v);
}

bool get_bool(const Config& c, const std::string& key) {
  const std::string& v = c.get(key);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(key, key + ": expected true or false, got '" + v + "'");
}

template <class F>
auto with_key(const std::string& key, F&& parse) {
  try {
    return parse();
  } catch (const ConfigError& e) {
    throw ConfigError(key, key + ": " + e.what());
  }
}

}  // namespace

Config::Config() {
  for (const KeyInfo& k : kKeys) values_[k.key] = k.value;
}

void Config::set(const std::string& key, const std::string& value) {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError(key, "unknown configuration key '" + key + "'");
  it->second = value;
}

const std::string& Config::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError(key, "unknown configuration key '" + key + "'");
  return it->second;
}

void Config::apply_preset(const std::string& name) {
  for (const Preset& p : presets()) {
    if (name != p.name) continue;
    for (const auto& [k, v] : p.values) set(k, v);
    return;
  }
  std::string known;
  for (const std::string& n : preset_names()) known += (known.empty() ? "" : ", ") + n;
  throw ConfigError("preset", "unknown preset '" + name + "' (known: " + known + ")");
}

void Config::merge_text(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("", source + ":" + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    if (!has_key(key)) {
      throw ConfigError(key, source + ":" + std::to_string(line_no) + ": unknown configuration key '" +
                                 key + "'");
    }
    set(key, trim(line.substr(eq + 1)));
  }
}

void Config::merge_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  merge_text(buf.str(), path);
}

void Config::merge_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw ConfigError(assignment, "override '" + assignment + "' is not of the form key=value");
  }
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

std::string Config::echo() const {
  std::ostringstream out;
  for (const auto& [k, v] : values_) out << k << " = " << v << '\n';
  return out.str();
}

std::vector<std::string> preset_names() {
  std::vector<std::string> names;
  for (const Preset& p : presets()) names.emplace_back(p.name);
  return names;
}

std::string describe_keys() {
  std::ostringstream out;
  for (const KeyInfo& k : kKeys) {
    out << "  " << k.key << " = " << (*k.value ? k.value : "\"\"") << "\n      " << k.help << '\n';
  }
  return out.str();
}

ExperimentConfig resolve(const Config& c) {
  ExperimentConfig e;

  // Data.
  e.data.path = c.get("data.path");
  e.data.toy = c.get("data.toy");
  if (!e.data.path.empty() && !e.data.toy.empty()) {
    throw ConfigError("data.toy", "set either data.path or data.toy, not both");
  }
  e.data.n = get_count(c, "data.n");
  e.data.dim = get_count(c, "data.d", 1);
  e.data.target = c.get("data.target");
  e.data.train_fraction = get_double(c, "data.train_fraction");
  if (!(e.data.train_fraction > 0.0 && e.data.train_fraction < 1.0)) {
    throw ConfigError("data.train_fraction", "data.train_fraction must lie strictly between 0 and 1");
  }
  e.data.task = with_key("data.task", [&] { return parse_task(c.get("data.task")); });
  if (!e.data.toy.empty()) {
    const ToyKind toy = with_key("data.toy", [&] { return parse_toy_kind(e.data.toy); });
    e.data.task = toy == ToyKind::banana ? Task::binary : Task::regression;
  }

  // Training.
  e.train.batch_size = get_count(c, "train.batch_size", 1);
  e.train.learning_rate = get_double(c, "train.lr");
  e.train.max_epochs = get_count(c, "train.epochs");
  const long seed = parse_number<long>(c, "train.seed");
  if (seed < 0) throw ConfigError("train.seed", "train.seed must be non-negative");
  e.train.seed = std::uint64_t(seed);
  e.train.beta1 = get_double(c, "train.beta1");
  e.train.beta2 = get_double(c, "train.beta2");
  e.train.epsilon = get_double(c, "train.epsilon");
  e.train.eval_every = get_count(c, "train.eval_every", 1);
  e.train.clip_norm = get_double(c, "train.clip_norm");
  validate(e.train, 0);

  const long data_seed = parse_number<long>(c, "data.seed");
  if (data_seed < -1) throw ConfigError("data.seed", "data.seed must be -1 or non-negative");
  e.data.seed = data_seed == -1 ? e.train.seed : std::uint64_t(data_seed);

  // Model.
  ModelSpec& m = e.model;
  m.kind = with_key("model.kind", [&] { return parse_model_kind(c.get("model.kind")); });
  m.kernel = with_key("model.kernel", [&] { return parse_kernel_kind(c.get("model.kernel")); });
  const std::string lik = c.get("model.likelihood");
  e.likelihood_auto = lik == "auto";
  if (e.likelihood_auto) {
    m.likelihood = e.data.task == Task::binary ? LikelihoodKind::probit : LikelihoodKind::gaussian;
  } else {
    m.likelihood = with_key("model.likelihood", [&] { return parse_likelihood_kind(lik); });
    const bool binary = e.data.task == Task::binary;
    if (binary != (m.likelihood == LikelihoodKind::probit)) {
      throw ConfigError("model.likelihood", "model.likelihood '" + lik + "' does not match the " +
                                                to_string(e.data.task) + " task");
    }
  }
  if (m.kind == ModelKind::exact && m.likelihood != LikelihoodKind::gaussian) {
    throw ConfigError("model.likelihood", "the exact GP supports only the gaussian likelihood");
  }
  m.num_inducing = get_count(c, "model.num_inducing", 1);
  const std::size_t layers = get_count(c, "model.layers");
  const std::size_t width = get_count(c, "model.width", 1);
  m.hidden.assign(layers, width);
  m.ard = get_bool(c, "model.ard");
  m.freeze_inducing = get_bool(c, "model.freeze_inducing");
  m.quadrature_nodes = get_count(c, "model.quadrature_nodes", 1);
  m.jitter.base = get_double(c, "model.jitter");
  m.jitter.cap = get_double(c, "model.jitter_cap");
  if (!(m.jitter.base > 0.0)) throw ConfigError("model.jitter", "model.jitter must be positive");
  if (!(m.jitter.cap >= m.jitter.base)) {
    throw ConfigError("model.jitter_cap", "model.jitter_cap must be at least model.jitter");
  }

  // Output, plots, benchmark.
  e.output_dir = c.get("output.dir");
  if (e.output_dir.empty()) throw ConfigError("output.dir", "output.dir must not be empty");
  e.plot.enabled = get_bool(c, "plot.enabled");
  e.plot.grid_points = get_count(c, "plot.grid_points", 2);
  e.plot.grid_side = get_count(c, "plot.grid_side", 2);
  const std::string probe = c.get("plot.probe");
  if (!probe.empty()) {
    std::istringstream in(probe);
    for (std::string field; std::getline(in, field, ',');) {
      field = trim(field);
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
      if (field.empty() || ec != std::errc() || ptr != field.data() + field.size()) {
        throw ConfigError("plot.probe", "plot.probe: cannot parse '" + field + "'");
      }
      e.plot.probe.push_back(v);
    }
  }
  e.bench.repeats = get_count(c, "bench.repeats", 1);
  e.bench.warmup_epochs = get_count(c, "bench.warmup_epochs", 1);
  e.bench.timed_epochs = get_count(c, "bench.timed_epochs", 1);
  e.bench.predict_points = get_count(c, "bench.predict_points", 1);
  return e;
}

}  // namespace idsgp
