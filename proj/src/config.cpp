#include "ksl/config.hpp"

#include <cmath>
#include <map>

#include "ksl/assets.hpp"
#include "ksl/error.hpp"
#include "ksl/io.hpp"
#include "ksl/rng.hpp"

namespace ksl {

namespace {

[[noreturn]] void invalid(const std::string& pointer, const std::string& what) {
  fail(ErrorKind::validation, "config: " + pointer + ": " + what);
}

}  // namespace

std::int64_t json_int(const Json& j) {
  if (j.is_number_integer()) return j.get<std::int64_t>();
  return static_cast<std::int64_t>(std::llround(j.get<double>()));
}

std::vector<double> json_doubles(const Json& j) {
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& v : j) out.push_back(v.get<double>());
  return out;
}

VectorXd json_vector(const Json& j) {
  std::vector<double> v = json_doubles(j);
  return Eigen::Map<VectorXd>(v.data(), static_cast<Index>(v.size()));
}

const std::string& config_schema_text() {
  static const std::string text(assets::config_schema);
  return text;
}

const Schema& config_schema() {
  static const Schema schema(Json::parse(config_schema_text()));
  return schema;
}

std::uint64_t RunConfig::seed() const { return static_cast<std::uint64_t>(json_int(json.at("seed"))); }

std::string RunConfig::command() const { return json.contains("command") ? json["command"].get<std::string>() : ""; }

const Json& RunConfig::section(const char* name) const {
  if (!json.contains(name)) invalid(std::string("/") + name, "section is required for this command");
  return json[name];
}

RunConfig materialize(const Json& raw, const std::string& source) {
  const Schema& schema = config_schema();
  std::vector<SchemaError> errors = schema.validate(raw);
  if (!errors.empty()) {
    std::string msg = source + ": " + (errors[0].pointer.empty() ? "/" : errors[0].pointer) + ": " + errors[0].message;
    if (errors.size() > 1) msg += " (and " + std::to_string(errors.size() - 1) + " more)";
    fail(ErrorKind::validation, msg);
  }
  RunConfig cfg;
  cfg.json = schema.apply_defaults(raw);
  return cfg;
}

RunConfig parse_config_text(const std::string& text, const std::string& source) {
  Json raw;
  try {
    raw = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::parse, source + ": " + e.what());
  }
  return materialize(raw, source);
}

RunConfig parse_config(const std::string& path) { return parse_config_text(read_file(path), path); }

std::string dump_config(const RunConfig& config) { return config.json.dump(2) + "\n"; }

std::string config_hash(const RunConfig& config) { return sha256_hex(dump_config(config)); }

KernelSpec kernel_from_json(const Json& j, const std::string& pointer) {
  const std::string family = j.at("family").get<std::string>();
  auto need = [&](const char* key) -> const Json& {
    if (!j.contains(key)) invalid(pointer + "/" + key, "required for family " + family);
    return j[key];
  };
  auto reject = [&](std::initializer_list<const char*> keys) {
    for (const char* key : keys)
      if (j.contains(key)) invalid(pointer + "/" + key, "not used by family " + family);
  };
  if (family == "linear") {
    reject({"depth", "bandwidth", "modes"});
    return KernelSpec::linear(j.contains("dim") ? json_int(j["dim"]) : 0,
                              j.contains("features") ? json_int(j["features"]) : 0);
  }
  if (family == "rbf" || family == "laplace") {
    reject({"depth", "modes", "dim", "features"});
    const double h = need("bandwidth").get<double>();
    return family == "rbf" ? KernelSpec::rbf(h) : KernelSpec::laplace(h);
  }
  if (family == "fourier_bandlimited") {
    reject({"depth", "bandwidth", "dim", "features"});
    return KernelSpec::fourier(static_cast<int>(json_int(need("modes"))));
  }
  reject({"bandwidth", "modes", "dim", "features"});
  return KernelSpec::ntk_relu(static_cast<int>(json_int(need("depth"))));
}

std::string measure_to_json(const DiscreteMeasure& measure, const Dataset& data) {
  require(measure.size() == data.M(), "measure length differs from dataset size");
  Json out = Json::object();
  for (Index i = 0; i < data.M(); ++i) out[data.ids[i]] = measure.masses(i);
  return out.dump(2) + "\n";
}

DiscreteMeasure measure_from_file(const std::string& path, const Dataset& data) {
  Json j;
  try {
    j = Json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::parse, path + ": " + e.what());
  }
  if (!j.is_object()) fail(ErrorKind::validation, path + ": measure file must map ids to masses");
  std::map<std::string, Index> index;
  for (Index i = 0; i < data.M(); ++i) index[data.ids[i]] = i;
  VectorXd w = VectorXd::Zero(data.M());
  for (auto it = j.begin(); it != j.end(); ++it) {
    auto found = index.find(it.key());
    if (found == index.end()) fail(ErrorKind::validation, path + ": unknown id \"" + it.key() + "\"");
    if (!it.value().is_number()) fail(ErrorKind::validation, path + ": mass of \"" + it.key() + "\" is not a number");
    w(found->second) = it.value().get<double>();
  }
  return from_weights(w);
}

DiscreteMeasure measure_from_json(const Json& j, const Dataset& data, const std::string& pointer) {
  const std::string type = j.at("type").get<std::string>();
  const Index M = data.M();
  auto need = [&](const char* key) -> const Json& {
    if (!j.contains(key)) invalid(pointer + "/" + key, "required for measure type " + type);
    return j[key];
  };
  auto sized = [&](const char* key) {
    VectorXd v = json_vector(need(key));
    if (v.size() != M)
      invalid(pointer + "/" + key, "has " + std::to_string(v.size()) + " entries for " + std::to_string(M) + " points");
    return v;
  };
  DiscreteMeasure m;
  if (type == "uniform") {
    m = uniform_measure(M);
  } else if (type == "masses") {
    VectorXd w = sized("masses");
    if (std::abs(w.sum() - 1.0) > 1e-9) invalid(pointer + "/masses", "masses must sum to 1");
    m = from_weights(w);
  } else if (type == "logits") {
    m = from_logits(sized("logits"));
  } else if (type == "dirac") {
    const std::int64_t at = json_int(need("index"));
    if (at >= M) invalid(pointer + "/index", "index out of range");
    m = dirac_measure(M, at);
  } else {
    m = measure_from_file(need("path").get<std::string>(), data);
  }
  m.dataset_ref = "config";
  return m;
}

Dataset dataset_from_config(const RunConfig& config) {
  const bool file = config.has("dataset");
  const bool synth = config.has("synthetic");
  if (file == synth) invalid("/dataset", "exactly one of dataset and synthetic must be given");
  if (file) {
    const Json& j = config.json["dataset"];
    const std::string path = j.at("path").get<std::string>();
    DataFormat fmt = j.contains("format") ? (j["format"] == "csv" ? DataFormat::csv : DataFormat::binary)
                                          : format_from_path(path);
    Dataset d = load_dataset(path, fmt);
    if (j.at("standardize").get<bool>()) standardize_features(d);
    return d;
  }
  const Json& j = config.json["synthetic"];
  const std::string family = j.at("family").get<std::string>();
  SyntheticSpec spec;
  if (family == "gaussian_diag") {
    if (!j.contains("variances")) invalid("/synthetic/variances", "required for gaussian_diag");
    spec = SyntheticSpec::gaussian(json_vector(j["variances"]));
  } else if (family == "sphere") {
    if (!j.contains("dimension")) invalid("/synthetic/dimension", "required for sphere");
    spec = SyntheticSpec::sphere(j.contains("radius") ? j["radius"].get<double>() : 1.0, json_int(j["dimension"]));
  } else {
    if (!j.contains("widths")) invalid("/synthetic/widths", "required for rectangular");
    spec = SyntheticSpec::rectangular(json_vector(j["widths"]));
  }
  const Index Q = json_int(j.at("points"));
  MatrixXd X = synth_sample(spec, Q, derive_seed(config.seed(), "synthetic"));
  if (j.at("moment_match").get<bool>()) {
    if (family != "gaussian_diag") invalid("/synthetic/moment_match", "only available for gaussian_diag");
    X = moment_match(X, spec.variances);
  }
  if (!j.contains("beta")) invalid("/synthetic/beta", "a linear target beta is required");
  VectorXd beta = json_vector(j["beta"]);
  if (beta.size() != X.cols())
    invalid("/synthetic/beta", "has " + std::to_string(beta.size()) + " entries for dimension " + std::to_string(X.cols()));
  MatrixXd Y = X * beta;
  return make_dataset(std::move(X), std::move(Y));
}

double config_lambda(const RunConfig& config) { return config.json.at("regression").at("lambda").get<double>(); }
double config_noise(const RunConfig& config) { return config.json.at("regression").at("noise").get<double>(); }

std::vector<double> theory_grid(const RunConfig& config) {
  return json_doubles(config.section("theory").at("P_grid"));
}

OptimizerConfig optimizer_from_config(const RunConfig& config) {
  const Json& j = config.section("optimizer");
  OptimizerConfig c;
  c.learning_rate = j.at("learning_rate").get<double>();
  c.steps = static_cast<int>(json_int(j.at("steps")));
  c.mode = j.at("mode") == "ascent" ? OptimizerConfig::Mode::ascent : OptimizerConfig::Mode::descent;
  c.P_budget = j.at("P_budget").get<double>();
  c.fd_step = j.at("fd_step").get<double>();
  c.fd_scheme = j.at("fd_scheme") == "forward" ? OptimizerConfig::FdScheme::forward : OptimizerConfig::FdScheme::central;
  c.convergence_tol = j.at("convergence_tol").get<double>();
  c.backtracking = j.at("backtracking").get<bool>();
  c.max_halvings = static_cast<int>(json_int(j.at("max_halvings")));
  c.support_threshold = j.at("support_threshold").get<double>();
  c.lambda = config_lambda(config);
  c.noise = config_noise(config);
  if (config.has("theory")) c.rank_threshold = config.json["theory"].at("rank_threshold").get<double>();
  return c;
}

ExperimentConfig experiment_from_config(const RunConfig& config) {
  const Json& j = config.section("empirical");
  ExperimentConfig c;
  if (j.contains("P_grid")) {
    for (const auto& v : j["P_grid"]) c.P_grid.push_back(json_int(v));
  } else {
    if (!config.has("theory")) invalid("/empirical/P_grid", "required when no theory grid is given");
    const Json& grid = config.json["theory"].at("P_grid");
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double P = grid[i].get<double>();
      if (P < 1 || P != std::floor(P))
        invalid("/theory/P_grid/" + std::to_string(i), "empirical curves need integer P >= 1");
      c.P_grid.push_back(static_cast<Index>(P));
    }
  }
  c.trials = static_cast<int>(json_int(j.at("trials")));
  c.memory_budget_bytes = j.at("memory_budget_gb").get<double>() * 1e9;
  c.master_seed = config.seed();
  c.lambda = config_lambda(config);
  c.noise = config_noise(config);
  return c;
}

}  // namespace ksl
