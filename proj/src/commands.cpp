#include "ksl/commands.hpp"

#include <omp.h>
#include <openssl/opensslv.h>
#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <functional>
#include <ostream>
#include <random>

#include "ksl/io.hpp"
#include "ksl/quadrature.hpp"
#include "ksl/rng.hpp"
#include "ksl/spectral.hpp"

namespace ksl {

namespace {

namespace fs = std::filesystem;

[[noreturn]] void invalid(const std::string& pointer, const std::string& what) {
  fail(ErrorKind::validation, "config: " + pointer + ": " + what);
}

// Everything the dataset-driven commands share.
struct Problem {
  Dataset data;
  KernelSpec kernel;
  MatrixXd K;
  DiscreteMeasure train;
  DiscreteMeasure test;
  double rank_threshold = kDefaultRankThreshold;
};

DiscreteMeasure measure_or_uniform(const RunConfig& cfg, const char* key, const Dataset& data) {
  if (!cfg.has(key)) return uniform_measure(data.M());
  return measure_from_json(cfg.json[key], data, std::string("/") + key);
}

Problem load_problem(const RunConfig& cfg) {
  Problem p;
  p.data = dataset_from_config(cfg);
  p.data.validate();
  p.kernel = kernel_from_json(cfg.section("kernel"));
  p.kernel.check(p.data.D());
  p.K = gram(p.kernel, p.data.X);
  p.train = measure_or_uniform(cfg, "train_measure", p.data);
  p.test = measure_or_uniform(cfg, "test_measure", p.data);
  if (cfg.has("theory")) p.rank_threshold = cfg.json["theory"].at("rank_threshold").get<double>();
  return p;
}

SpectralDecomposition decompose(const Problem& p, const std::string& cache) {
  return cached_decompose(cache, p.K, p.train, p.rank_threshold, 0.0);
}

std::string binary_bytes(const SpectralDecomposition& dec) {
  const fs::path tmp = fs::temp_directory_path() /
                       ("ksl_dec_" + std::to_string(::getpid()) + "_" + std::to_string(omp_get_wtime()) + ".ksld");
  save_decomposition(tmp.string(), dec);
  std::string bytes = read_file(tmp.string());
  fs::remove(tmp);
  return bytes;
}

std::string sorted_masses_csv(const DiscreteMeasure& m) {
  std::vector<Index> order(static_cast<std::size_t>(m.size()));
  for (Index i = 0; i < m.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return m.masses(a) > m.masses(b); });
  MatrixXd rows(m.size(), 3);
  for (Index r = 0; r < m.size(); ++r)
    rows.row(r) << static_cast<double>(r), static_cast<double>(order[r]), m.masses(order[r]);
  return csv_string({"rank", "index", "mass"}, rows);
}

std::string trace_csv(const OptimizationTrace& t) {
  MatrixXd rows(static_cast<Index>(t.Eg.size()), 3);
  for (Index s = 0; s < rows.rows(); ++s) rows.row(s) << static_cast<double>(s), t.Eg[s], t.participation[s];
  return csv_string({"step", "Eg", "participation_ratio"}, rows);
}

Json trace_summary(const OptimizationTrace& t) {
  return Json{{"Eg_initial", t.Eg.front()},
              {"Eg_final", t.Eg.back()},
              {"participation_ratio", t.participation.back()},
              {"accepted_steps", t.accepted},
              {"converged", t.converged},
              {"diagnostic", t.diagnostic}};
}

// ------------------------------------------------------------------ commands

Artifacts cmd_decompose(const RunConfig& cfg, const std::string& cache) {
  const Problem p = load_problem(cfg);
  const SpectralDecomposition dec = decompose(p, cache);
  const TargetProjection abar = project_target(dec, p.data.Y, p.train);
  Artifacts out;
  MatrixXd ev(dec.modes(), 3);
  for (Index r = 0; r < dec.modes(); ++r) ev.row(r) << static_cast<double>(r), dec.eigenvalues(r), r < dec.rank ? 1.0 : 0.0;
  out.add("eigenvalues.csv", csv_string({"mode", "eigenvalue", "in_rkhs"}, ev));
  std::vector<std::string> header{"mode"};
  for (Index c = 0; c < abar.abar.cols(); ++c) header.push_back("abar" + std::to_string(c));
  MatrixXd ab(dec.modes(), 1 + abar.abar.cols());
  for (Index r = 0; r < dec.modes(); ++r) {
    ab(r, 0) = static_cast<double>(r);
    ab.row(r).tail(abar.abar.cols()) = abar.abar.row(r);
  }
  out.add("abar.csv", csv_string(header, ab));
  out.add("decomposition.ksld", binary_bytes(dec));
  Json summary{{"points", dec.points()},
               {"support", dec.support.size()},
               {"modes", dec.modes()},
               {"rank", dec.rank},
               {"rank_threshold", dec.rank_threshold},
               {"key", decomposition_key(p.K, p.train, p.rank_threshold, 0.0)}};
  out.add("summary.json", summary.dump(2) + "\n");
  return out;
}

Artifacts cmd_theory_curve(const RunConfig& cfg, const std::string& cache) {
  const Problem p = load_problem(cfg);
  const std::vector<double> grid = theory_grid(cfg);
  const SpectralDecomposition dec = decompose(p, cache);
  const TargetProjection abar = project_target(dec, p.data.Y, p.train);
  const TestMoments m = test_moments(dec, abar, dec.Phi.leftCols(dec.rank), p.data.Y, p.test.masses);
  const std::vector<TheoryPrediction> preds =
      theory_curve(dec.in_eigenvalues(), in_abar(dec, abar), out_power(dec, abar), m, grid, config_lambda(cfg),
                   VectorXd::Constant(p.data.C(), config_noise(cfg)));
  Artifacts out;
  out.add("theory.csv", csv_string(theory_columns(), theory_rows(grid, preds)));
  return out;
}

Artifacts cmd_empirical_curve(const RunConfig& cfg, const std::string&) {
  const Problem p = load_problem(cfg);
  const ExperimentConfig ec = experiment_from_config(cfg);
  EmpiricalCurve curve = run_learning_curve(ec, discrete_problem(p.K, p.data.Y, p.train, p.test));
  Artifacts out;
  out.add("empirical.csv", csv_string(empirical_columns(), empirical_rows(curve)));
  return out;
}

Artifacts cmd_optimize_train(const RunConfig& cfg, const std::string&) {
  const Problem p = load_problem(cfg);
  OptimizerConfig oc = optimizer_from_config(cfg);
  oc.target = OptimizerConfig::Target::train_measure;
  const OptimizationTrace t = optimize_train_measure(p.K, p.data.Y, p.test, oc);
  if (!std::isfinite(t.Eg.front()))
    fail(ErrorKind::numerical, "optimize-train: theory diverges for the initial measure at P_budget");
  Artifacts out;
  out.add("trace.csv", trace_csv(t));
  out.add("measure.json", measure_to_json(t.final_measure, p.data));
  out.add("sorted_masses.csv", sorted_masses_csv(t.final_measure));
  out.add("summary.json", trace_summary(t).dump(2) + "\n");
  return out;
}

Artifacts cmd_optimize_test(const RunConfig& cfg, const std::string& cache) {
  const Problem p = load_problem(cfg);
  OptimizerConfig oc = optimizer_from_config(cfg);
  oc.target = OptimizerConfig::Target::test_measure;
  const SpectralDecomposition dec = decompose(p, cache);
  const TargetProjection abar = project_target(dec, p.data.Y, p.train);
  const VectorXd c =
      pointwise_error_density_at(dec, abar, oc.P_budget, oc.lambda, oc.noise, dec.Phi.leftCols(dec.rank), p.data.Y);
  if (!c.allFinite()) fail(ErrorKind::numerical, "optimize-test: theory diverges at P_budget");
  const OptimizationTrace t = optimize_test_measure(c, oc);
  MatrixXd dens(c.size(), 2);
  for (Index i = 0; i < c.size(); ++i) dens.row(i) << static_cast<double>(i), c(i);
  Artifacts out;
  out.add("trace.csv", trace_csv(t));
  out.add("measure.json", measure_to_json(t.final_measure, p.data));
  out.add("sorted_masses.csv", sorted_masses_csv(t.final_measure));
  out.add("density.csv", csv_string({"index", "c"}, dens));
  out.add("summary.json", trace_summary(t).dump(2) + "\n");
  return out;
}

MatrixXd covariance_from(const Json& j, const char* full, const char* diag, Index D, const std::string& where) {
  if (j.contains(full)) {
    const Json& rows = j[full];
    MatrixXd C(static_cast<Index>(rows.size()), static_cast<Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r].size() != rows.size()) invalid(where + "/" + full + "/" + std::to_string(r), "matrix must be square");
      for (std::size_t c = 0; c < rows.size(); ++c) C(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c].get<double>();
    }
    return C;
  }
  if (j.contains(diag)) return json_vector(j[diag]).asDiagonal();
  if (D > 0) return MatrixXd::Identity(D, D);
  invalid(where + "/" + diag, "a covariance is required");
}

Artifacts cmd_closed_form(const RunConfig& cfg, const std::string&) {
  const Json& j = cfg.section("closed_form");
  const std::string model = j.at("model").get<std::string>();
  const double lambda = config_lambda(cfg), noise = config_noise(cfg);
  auto need = [&](const char* key) -> const Json& {
    if (!j.contains(key)) invalid(std::string("/closed_form/") + key, "required for model " + model);
    return j[key];
  };
  Artifacts out;
  if (model == "ntk_sphere") {
    SphereNtkSpec s;
    s.eta_bar = json_vector(need("eta_bar"));
    s.a2 = json_vector(need("a2"));
    s.D = json_int(need("dimension"));
    s.R = j.at("R").get<double>();
    s.Rt = j.at("Rt").get<double>();
    s.stage = j.contains("stage") ? json_int(j["stage"]) : 0;
    s.noise = noise;
    s.lambda = lambda;
    std::vector<double> alpha;
    if (j.contains("alpha_grid")) {
      alpha = json_doubles(j["alpha_grid"]);
    } else {
      const double N = sphere_degeneracy(s.D, s.stage);
      for (double P : json_doubles(need("P_grid"))) alpha.push_back(P / N);
    }
    MatrixXd rows(static_cast<Index>(alpha.size()), 7);
    for (std::size_t i = 0; i < alpha.size(); ++i) {
      const SphereStageResult r = ntk_sphere_Eg(s, alpha[i]);
      rows.row(static_cast<Index>(i)) << alpha[i], r.kappa_prime, r.lambda_tilde, r.Eg, r.effective_noise,
          r.irreducible, r.diverged ? 1.0 : 0.0;
    }
    out.add("closed_form.csv", csv_string({"alpha", "kappa_prime", "lambda_tilde", "Eg", "effective_noise",
                                           "irreducible", "diverged"},
                                          rows));
    return out;
  }
  const std::vector<double> grid = json_doubles(need("P_grid"));
  const VectorXd beta = json_vector(need("beta"));
  if (model == "gaussian_linear") {
    LinearGaussianSpec s;
    s.beta = beta;
    s.C = covariance_from(j, "C", "train_variances", beta.size(), "/closed_form");
    s.Ctilde = covariance_from(j, "Ctilde", "test_variances", beta.size(), "/closed_form");
    s.noise = noise;
    s.lambda = lambda;
    std::vector<TheoryPrediction> preds;
    for (double P : grid) preds.push_back(gaussian_linear_Eg(s, P));
    out.add("closed_form.csv", csv_string(theory_columns(), theory_rows(grid, preds)));
    return out;
  }
  DiagonalLinearSpec s;
  s.D = beta.size();
  if (j.contains("D") && json_int(j["D"]) != s.D) invalid("/closed_form/beta", "length must equal D");
  s.beta = beta;
  s.sigma2 = j.at("sigma2").get<double>();
  s.sigma2tilde = j.at("sigma2tilde").get<double>();
  s.M_r = json_int(need("M_r"));
  s.M_s = j.contains("M_s") ? json_int(j["M_s"]) : s.D;
  s.M = j.contains("M") ? json_int(j["M"]) : s.D;
  s.N = j.contains("N") ? json_int(j["N"]) : s.D;
  s.normalized = j.at("normalized").get<bool>();
  s.noise = noise;
  s.lambda = lambda;
  MatrixXd rows(static_cast<Index>(grid.size()), 10);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const DiagonalResult r = model == "general_linear" ? general_linear_Eg(s, grid[i]) : diagonal_linear_Eg(s, grid[i]);
    rows.row(static_cast<Index>(i)) << grid[i], lambda, r.alpha, r.kappa_prime, r.lambda_tilde, r.gamma, r.Eg,
        r.effective_noise, r.irreducible, r.diverged ? 1.0 : 0.0;
  }
  out.add("closed_form.csv", csv_string({"P", "lambda", "alpha", "kappa_prime", "lambda_tilde", "gamma", "Eg",
                                         "effective_noise", "irreducible", "diverged"},
                                        rows));
  return out;
}

Artifacts cmd_spectrum(const RunConfig& cfg, const std::string&) {
  const Json& j = cfg.section("spectrum");
  const KernelSpec k = kernel_from_json(j.at("kernel"), "/spectrum/kernel");
  const Index D = json_int(j.at("dimension"));
  const int kmax = static_cast<int>(json_int(j.at("max_degree")));
  const int nodes = static_cast<int>(json_int(j.at("nodes")));
  std::function<double(double)> profile;
  switch (k.family) {
    case KernelSpec::Family::ntk_relu: {
      const int depth = k.depth;
      profile = [depth](double t) { return ntk_relu_profile(depth, t); };
      break;
    }
    case KernelSpec::Family::linear: {
      const double scale = 1.0 / static_cast<double>(k.features > 0 ? k.features : D);
      if (k.features > 0 && k.features != D) invalid("/spectrum/kernel/features", "must use every coordinate");
      profile = [scale](double t) { return scale * t; };
      break;
    }
    case KernelSpec::Family::rbf: {
      const double h = k.bandwidth;
      profile = [h](double t) { return std::exp(-(2.0 - 2.0 * t) / (2.0 * h * h)); };
      break;
    }
    case KernelSpec::Family::laplace: {
      const double h = k.bandwidth;
      profile = [h](double t) { return std::exp(-std::sqrt(std::max(0.0, 2.0 - 2.0 * t)) / h); };
      break;
    }
    default:
      invalid("/spectrum/kernel/family", "not a dot-product kernel on the sphere");
  }
  const VectorXd eta = dot_product_spectrum(profile, D, kmax, nodes);
  MatrixXd rows(eta.size(), 4);
  for (Index d = 0; d < eta.size(); ++d) {
    const double N = sphere_degeneracy(D, d);
    rows.row(d) << static_cast<double>(d), N, eta(d), N * eta(d);
  }
  Artifacts out;
  out.add("spectrum.csv", csv_string({"k", "degeneracy", "eta", "eta_bar"}, rows));
  return out;
}

Artifacts cmd_compare(const RunConfig& cfg, const std::string&) {
  const Json& j = cfg.section("compare");
  const CsvTable th = read_csv_numeric(j.at("theory").get<std::string>());
  const CsvTable em = read_csv_numeric(j.at("empirical").get<std::string>());
  std::vector<double> P, Eg;
  const std::size_t tp = th.column("P"), te = th.column("Eg");
  for (const auto& row : th.rows) {
    P.push_back(row[tp]);
    Eg.push_back(row[te]);
  }
  EmpiricalCurve curve;
  const std::size_t ep = em.column("P"), em_ = em.column("Eg_mean"), es = em.column("Eg_std"),
                    ese = em.column("Eg_stderr"), et = em.column("trials");
  for (const auto& row : em.rows) {
    EmpiricalPoint e;
    if (row[ep] < 1 || row[ep] != std::floor(row[ep]))
      fail(ErrorKind::validation, "compare: empirical P values must be positive integers");
    e.P = static_cast<Index>(row[ep]);
    e.mean = row[em_];
    e.std = row[es];
    e.stderr_ = row[ese];
    e.trials = static_cast<int>(row[et]);
    curve.points.push_back(e);
  }
  CompareReport rep;
  try {
    rep = compare_report(P, Eg, curve, j.at("z_limit").get<double>(), j.at("required_fraction").get<double>());
  } catch (const Error& e) {
    fail(ErrorKind::validation, e.what());
  }
  Artifacts out;
  out.add("compare.json", compare_json(rep).dump(2) + "\n");
  return out;
}

Artifacts cmd_gradcheck(const RunConfig& cfg, const std::string& cache) {
  const Problem p = load_problem(cfg);
  const Json j = cfg.has("gradcheck") ? cfg.json["gradcheck"] : config_schema().apply_defaults(Json{{"gradcheck", Json::object()}})["gradcheck"];
  const std::string target = j.at("target").get<std::string>();
  const double h = j.at("fd_step").get<double>();
  const double P = j.at("P").get<double>();
  const double lambda = config_lambda(cfg), noise = config_noise(cfg);
  VectorXd z(p.data.M());
  auto gen = make_stream(cfg.seed(), "gradcheck_logits");
  std::normal_distribution<double> normal(0.0, 0.5);
  for (Index i = 0; i < z.size(); ++i) z(i) = normal(gen);

  VectorXd reference, check;
  double rel = 0.0, limit = 0.0;
  if (target == "train_measure") {
    const Objective f = [&](const VectorXd& x) {
      return get_loss(x, p.K, p.data.Y, lambda, P, noise, p.test, p.rank_threshold);
    };
    const RichardsonCheck r = richardson_check(f, z, h);
    reference = r.central;
    check = r.richardson;
    rel = r.relative_error;
    limit = 1e-4;
  } else {
    const SpectralDecomposition dec = decompose(p, cache);
    const TargetProjection abar = project_target(dec, p.data.Y, p.train);
    const VectorXd c =
        pointwise_error_density_at(dec, abar, P, lambda, noise, dec.Phi.leftCols(dec.rank), p.data.Y);
    if (!c.allFinite()) fail(ErrorKind::numerical, "gradcheck: theory diverges at P");
    reference = test_measure_gradient(c, z);
    check = fd_gradient([&](const VectorXd& x) { return test_measure_loss(c, x); }, z, h,
                        OptimizerConfig::FdScheme::central);
    const double n = reference.norm();
    rel = n > 0 ? (reference - check).norm() / n : (reference - check).norm();
    limit = 1e-6;
  }
  if (!reference.allFinite()) fail(ErrorKind::numerical, "gradcheck: gradient is not finite");
  MatrixXd rows(z.size(), 3);
  for (Index i = 0; i < z.size(); ++i) rows.row(i) << static_cast<double>(i), reference(i), check(i);
  Artifacts out;
  out.add("gradient.csv",
          csv_string({"index", target == "train_measure" ? "central" : "analytic",
                      target == "train_measure" ? "richardson" : "central"},
                     rows));
  out.add("gradcheck.json", Json{{"target", target},
                                 {"P", P},
                                 {"fd_step", h},
                                 {"relative_error", rel},
                                 {"limit", limit},
                                 {"pass", rel < limit}}
                                    .dump(2) +
                                "\n");
  return out;
}

Artifacts cmd_reproduce(const RunConfig& cfg, const std::string&) {
  Json summary;
  Artifacts out = run_scenario(cfg.section("scenario"), cfg.seed(), &summary);
  return out;
}

}  // namespace

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::domain:
    case ErrorKind::parse:
    case ErrorKind::validation: return exit_validation;
    case ErrorKind::numerical: return exit_numerical;
    case ErrorKind::io: return exit_io;
  }
  return exit_internal;
}

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"decompose",   "theory-curve", "empirical-curve", "optimize-train",
                                              "optimize-test", "closed-form", "spectrum",        "compare",
                                              "gradcheck",   "reproduce"};
  return names;
}

RunConfig resolve_config(const CommandLine& cl) {
  Json raw = Json::object();
  std::string source = "config";
  if (!cl.config_path.empty()) {
    source = cl.config_path;
    try {
      raw = Json::parse(read_file(cl.config_path));
    } catch (const nlohmann::json::parse_error& e) {
      fail(ErrorKind::parse, cl.config_path + ": " + e.what());
    }
    if (!raw.is_object()) fail(ErrorKind::validation, cl.config_path + ": /: expected a JSON object");
  } else if (cl.command != "reproduce") {
    fail(ErrorKind::validation, "--config is required for " + cl.command);
  }
  if (cl.command == "reproduce") {
    const std::string text = bundled_config(cl.figure);
    if (text.empty()) fail(ErrorKind::validation, "reproduce: unknown figure \"" + cl.figure + "\"");
    Json merged = Json::parse(text);
    if (raw.contains("scenario") && raw["scenario"].is_object()) {
      if (raw["scenario"].contains("figure") && raw["scenario"]["figure"] != cl.figure)
        fail(ErrorKind::validation, source + ": /scenario/figure: does not match the requested figure");
      for (auto it = raw["scenario"].begin(); it != raw["scenario"].end(); ++it) merged["scenario"][it.key()] = it.value();
    }
    for (auto it = raw.begin(); it != raw.end(); ++it)
      if (it.key() != "scenario") merged[it.key()] = it.value();
    raw = std::move(merged);
  }
  raw["command"] = cl.command;
  if (cl.seed) raw["seed"] = *cl.seed;
  return materialize(raw, source);
}

Artifacts execute(const std::string& command, const RunConfig& cfg, const std::string& cache) {
  if (command == "decompose") return cmd_decompose(cfg, cache);
  if (command == "theory-curve") return cmd_theory_curve(cfg, cache);
  if (command == "empirical-curve") return cmd_empirical_curve(cfg, cache);
  if (command == "optimize-train") return cmd_optimize_train(cfg, cache);
  if (command == "optimize-test") return cmd_optimize_test(cfg, cache);
  if (command == "closed-form") return cmd_closed_form(cfg, cache);
  if (command == "spectrum") return cmd_spectrum(cfg, cache);
  if (command == "compare") return cmd_compare(cfg, cache);
  if (command == "gradcheck") return cmd_gradcheck(cfg, cache);
  if (command == "reproduce") return cmd_reproduce(cfg, cache);
  fail(ErrorKind::validation, "unknown command \"" + command + "\"");
}

void write_outputs(const std::string& dir, const std::string& command, const RunConfig& cfg,
                   const Artifacts& artifacts) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorKind::io, "cannot create output directory " + dir + ": " + ec.message());
  const std::string config_text = dump_config(cfg);
  write_file_atomic((fs::path(dir) / "config.json").string(), config_text);
  Json files = Json::array();
  files.push_back(Json{{"file", "config.json"}, {"sha256", sha256_hex(config_text)}});
  for (const auto& [name, contents] : artifacts.files) {
    write_file_atomic((fs::path(dir) / name).string(), contents);
    files.push_back(Json{{"file", name}, {"sha256", sha256_hex(contents)}});
  }
  Json manifest{{"tool", "ksl"},
                {"version", kVersion},
                {"command", command},
                {"seed", cfg.seed()},
                {"config_sha256", config_hash(cfg)},
                {"libraries",
                 {{"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                std::to_string(EIGEN_MINOR_VERSION)},
                  {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                        std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                        std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
                  {"openssl", OPENSSL_VERSION_TEXT}}},
                {"artifacts", files}};
  if (command == "reproduce") manifest["figure"] = cfg.json.at("scenario").at("figure");
  write_file_atomic((fs::path(dir) / "manifest.json").string(), manifest.dump(2) + "\n");
}

int run_command_line(const CommandLine& cl, std::ostream& log) {
  try {
    init_linalg();
    if (!lapack_backend_ok())
      log << "ksl: warning: LAPACK eigensolver failed its self-check, using the slower Eigen solver"
             " (setting OPENBLAS_CORETYPE may help)\n";
    if (cl.threads) {
      if (*cl.threads < 1) fail(ErrorKind::validation, "--threads must be at least 1");
      omp_set_num_threads(*cl.threads);
    }
    const RunConfig cfg = resolve_config(cl);
    std::string out_dir = cl.out_dir;
    if (out_dir.empty()) out_dir = cfg.json.contains("output") ? cfg.json["output"].get<std::string>() : "ksl_out";
    const Artifacts artifacts = execute(cl.command, cfg, cl.cache_dir);
    write_outputs(out_dir, cl.command, cfg, artifacts);
    log << "ksl " << cl.command << ": wrote " << artifacts.files.size() + 2 << " files to " << out_dir << "\n";
    return exit_ok;
  } catch (const Error& e) {
    log << "ksl " << cl.command << ": " << to_string(e.kind()) << " error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    log << "ksl " << cl.command << ": internal error: " << e.what() << "\n";
    return exit_internal;
  }
}

}  // namespace ksl
