#include "idsgp/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "idsgp/errors.hpp"

namespace idsgp {

using nlohmann::json;

namespace {

constexpr const char* kFormat = "idsgp-checkpoint";
constexpr int kVersion = 1;

json tensor_json(const Tensor& t) {
  return json{{"shape", t.shape()}, {"data", t.data()}};
}

Tensor tensor_from(const json& j) {
  Shape shape = j.at("shape").get<Shape>();
  std::vector<double> data = j.at("data").get<std::vector<double>>();
  return Tensor(std::move(shape), std::move(data));
}

json spec_json(const ModelSpec& s) {
  return json{{"kind", to_string(s.kind)},
              {"kernel", to_string(s.kernel)},
              {"likelihood", to_string(s.likelihood)},
              {"input_dim", s.input_dim},
              {"num_inducing", s.num_inducing},
              {"hidden", s.hidden},
              {"ard", s.ard},
              {"freeze_inducing", s.freeze_inducing},
              {"quadrature_nodes", s.quadrature_nodes},
              {"jitter", {{"base", s.jitter.base}, {"growth", s.jitter.growth}, {"cap", s.jitter.cap}}}};
}

ModelSpec spec_from(const json& j) {
  ModelSpec s;
  s.kind = parse_model_kind(j.at("kind").get<std::string>());
  s.kernel = parse_kernel_kind(j.at("kernel").get<std::string>());
  s.likelihood = parse_likelihood_kind(j.at("likelihood").get<std::string>());
  s.input_dim = j.at("input_dim").get<std::size_t>();
  s.num_inducing = j.at("num_inducing").get<std::size_t>();
  s.hidden = j.at("hidden").get<std::vector<std::size_t>>();
  s.ard = j.at("ard").get<bool>();
  s.freeze_inducing = j.at("freeze_inducing").get<bool>();
  s.quadrature_nodes = j.at("quadrature_nodes").get<std::size_t>();
  const json& jit = j.at("jitter");
  s.jitter.base = jit.at("base").get<double>();
  s.jitter.growth = jit.at("growth").get<double>();
  s.jitter.cap = jit.at("cap").get<double>();
  return s;
}

}  // namespace

std::string to_json(const Checkpoint& c) {
  json params = json::object();
  for (const auto& [name, value] : c.model.params.entries()) params[name] = tensor_json(value);
  json j{{"format", kFormat},
         {"version", kVersion},
         {"spec", spec_json(c.model.spec)},
         {"frozen", c.model.frozen},
         {"task", to_string(c.task)},
         {"standardization",
          {{"x_mean", c.stats.x_mean},
           {"x_std", c.stats.x_std},
           {"y_mean", c.stats.y_mean},
           {"y_std", c.stats.y_std}}},
         {"feature_names", c.feature_names},
         {"target_name", c.target_name},
         {"epochs", c.epochs},
         {"config", c.config},
         {"parameters", params}};
  return j.dump(1);
}

Checkpoint checkpoint_from_json(const std::string& text, const std::string& source) {
  try {
    const json j = json::parse(text);
    if (j.at("format").get<std::string>() != kFormat)
      throw DataError(source + ": not a checkpoint file");
    if (j.at("version").get<int>() != kVersion)
      throw DataError(source + ": unsupported checkpoint version " + j.at("version").dump());
    Checkpoint c;
    c.model.spec = spec_from(j.at("spec"));
    c.model.frozen = j.at("frozen").get<std::set<std::string>>();
    for (const auto& [name, value] : j.at("parameters").items()) c.model.params.set(name, tensor_from(value));
    c.task = parse_task(j.at("task").get<std::string>());
    const json& st = j.at("standardization");
    c.stats.x_mean = st.at("x_mean").get<std::vector<double>>();
    c.stats.x_std = st.at("x_std").get<std::vector<double>>();
    c.stats.y_mean = st.at("y_mean").get<double>();
    c.stats.y_std = st.at("y_std").get<double>();
    c.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    c.target_name = j.at("target_name").get<std::string>();
    c.epochs = j.at("epochs").get<std::size_t>();
    c.config = j.at("config").get<std::string>();
    if (c.stats.x_mean.size() != c.model.spec.input_dim || c.stats.x_std.size() != c.model.spec.input_dim)
      throw DataError(source + ": standardization does not match the model input dimension");
    if (!c.feature_names.empty() && c.feature_names.size() != c.model.spec.input_dim)
      throw DataError(source + ": feature names do not match the model input dimension");
    return c;
  } catch (const json::exception& e) {
    throw DataError(source + ": malformed checkpoint (" + e.what() + ")");
  } catch (const ConfigError& e) {
    throw DataError(source + ": malformed checkpoint (" + e.what() + ")");
  }
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint '" + path + "'");
  out << to_json(ckpt) << '\n';
  if (!out) throw DataError("failed writing checkpoint '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open checkpoint '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return checkpoint_from_json(buf.str(), path);
}

}  // namespace idsgp
