#include "ksl/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <type_traits>

#include "ksl/assets.hpp"
#include "ksl/error.hpp"
#include "ksl/io.hpp"
#include "ksl/kernels.hpp"
#include "ksl/quadrature.hpp"
#include "ksl/rng.hpp"
#include "ksl/spectral.hpp"

namespace ksl {

namespace {

std::string label(double x) {
  std::string s = format_double(x);
  std::replace(s.begin(), s.end(), '.', 'p');
  std::replace(s.begin(), s.end(), '-', 'm');
  std::replace(s.begin(), s.end(), '+', '_');
  return s;
}

std::vector<double> as_doubles(const std::vector<Index>& v) { return {v.begin(), v.end()}; }

std::vector<double> theory_Eg(const std::vector<TheoryPrediction>& preds) {
  std::vector<double> out;
  for (const auto& p : preds) out.push_back(p.Eg);
  return out;
}

MatrixXd diagonal_rows(const std::vector<double>& P, double lambda, const std::vector<DiagonalResult>& rs) {
  MatrixXd rows(static_cast<Index>(P.size()), 10);
  for (std::size_t i = 0; i < P.size(); ++i) {
    const DiagonalResult& r = rs[i];
    rows.row(static_cast<Index>(i)) << P[i], lambda, r.alpha, r.kappa_prime, r.lambda_tilde, r.gamma, r.Eg,
        r.effective_noise, r.irreducible, r.diverged ? 1.0 : 0.0;
  }
  return rows;
}

const std::vector<std::string> kDiagonalColumns{"P",     "lambda", "alpha",           "kappa_prime", "lambda_tilde",
                                                "gamma", "Eg",     "effective_noise", "irreducible", "diverged"};

// Theory curve for a test measure given on arbitrary points.
std::vector<TheoryPrediction> curve_on_points(const SpectralDecomposition& dec, const TargetProjection& abar,
                                              const MatrixXd& K_cross, const MatrixXd& Y_test,
                                              const std::vector<double>& P, double lambda, double noise) {
  const MatrixXd Phi = nystrom_extend(dec, K_cross);
  const VectorXd w = VectorXd::Constant(K_cross.rows(), 1.0 / static_cast<double>(K_cross.rows()));
  const TestMoments m = test_moments(dec, abar, Phi, Y_test, w);
  return theory_curve(dec.in_eigenvalues(), in_abar(dec, abar), out_power(dec, abar), m, P, lambda,
                      VectorXd::Constant(Y_test.cols(), noise));
}

template <class T>
T get_or(const Json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  if constexpr (std::is_same_v<T, Index> || std::is_same_v<T, int> || std::is_same_v<T, std::uint64_t>) {
    const Json& v = j[key];
    return static_cast<T>(v.is_number_integer() ? v.get<std::int64_t>() : std::llround(v.get<double>()));
  } else {
    return j[key].get<T>();
  }
}

std::vector<Index> index_list(const Json& j, const char* key, std::vector<Index> fallback) {
  if (!j.contains(key)) return fallback;
  std::vector<Index> out;
  for (const auto& v : j[key]) out.push_back(v.is_number_integer() ? v.get<Index>() : std::llround(v.get<double>()));
  return out;
}

std::vector<double> double_list(const Json& j, const char* key, std::vector<double> fallback) {
  if (!j.contains(key)) return fallback;
  std::vector<double> out;
  for (const auto& v : j[key]) out.push_back(v.get<double>());
  return out;
}

void require_grid(const std::vector<Index>& grid, const char* who) {
  require(!grid.empty(), std::string(who) + ": P grid is empty");
  for (Index P : grid) require(P >= 1, std::string(who) + ": P values must be at least 1");
}

Json curve_summary(const CompareReport& rep) {
  return Json{{"fraction_within", rep.fraction_within}, {"max_abs_z", rep.max_abs_z}, {"pass", rep.pass}};
}

}  // namespace

VectorXd draw_beta(Index D, Index strong, Index weak, double weak_variance, bool normalize, std::uint64_t seed) {
  require(D >= 1 && strong >= 0 && weak >= 0 && strong + weak <= D, "draw_beta: need strong + weak <= D");
  require(weak_variance >= 0, "draw_beta: weak variance must be >= 0");
  auto gen = make_stream(seed, "beta");
  std::normal_distribution<double> normal(0.0, 1.0);
  VectorXd beta = VectorXd::Zero(D);
  for (Index i = 0; i < strong; ++i) beta(i) = normal(gen);
  for (Index i = strong; i < strong + weak; ++i) beta(i) = std::sqrt(weak_variance) * normal(gen);
  if (normalize) {
    const double n = beta.norm();
    require(n > 0, "draw_beta: cannot normalize a zero target");
    beta /= n;
  }
  return beta;
}

std::vector<std::string> theory_columns() {
  return {"P", "kappa", "gamma", "gamma_prime", "Eg", "bias", "variance", "Eg_matched", "delta", "irreducible",
          "diverged"};
}

MatrixXd theory_rows(const std::vector<double>& P, const std::vector<TheoryPrediction>& preds) {
  require(P.size() == preds.size(), "theory_rows: length mismatch");
  MatrixXd rows(static_cast<Index>(P.size()), 11);
  for (std::size_t i = 0; i < P.size(); ++i) {
    const TheoryPrediction& t = preds[i];
    rows.row(static_cast<Index>(i)) << P[i], t.state.kappa, t.state.gamma, t.state.gamma_prime, t.Eg, t.bias,
        t.variance, t.Eg_matched, t.delta, t.irreducible, t.diverged ? 1.0 : 0.0;
  }
  return rows;
}

std::vector<std::string> empirical_columns() { return {"P", "Eg_mean", "Eg_std", "Eg_stderr", "trials"}; }

MatrixXd empirical_rows(const EmpiricalCurve& curve) {
  MatrixXd rows(static_cast<Index>(curve.points.size()), 5);
  for (std::size_t i = 0; i < curve.points.size(); ++i) {
    const EmpiricalPoint& e = curve.points[i];
    rows.row(static_cast<Index>(i)) << static_cast<double>(e.P), e.mean, e.std, e.stderr_,
        static_cast<double>(e.trials);
  }
  return rows;
}

Json compare_json(const CompareReport& rep) {
  Json rows = Json::array();
  for (const CompareRow& r : rep.rows) {
    rows.push_back(Json{{"P", r.P}, {"theory", r.theory}, {"mean", r.mean}, {"stderr", r.stderr_}, {"z", r.z}});
  }
  return Json{{"rows", rows},
              {"max_abs_z", rep.max_abs_z},
              {"fraction_within", rep.fraction_within},
              {"z_limit", rep.z_limit},
              {"pass", rep.pass},
              {"diagnostics", rep.diagnostics}};
}

// ---------------------------------------------------------------- fig3a

Fig3aResult run_fig3a(const Fig3aParams& p, std::uint64_t seed) {
  require_grid(p.P_grid, "fig3a");
  Fig3aResult res;
  res.beta = draw_beta(p.D, p.strong_modes, p.weak_modes, p.weak_variance, p.normalize_beta, p.beta_seed);
  const std::vector<double> P = as_doubles(p.P_grid);
  Json report{{"figure", "fig3a"}, {"curves", Json::array()}};
  for (Index Mr : p.M_r_list) {
    require(Mr >= 1 && Mr <= p.D, "fig3a: M_r must lie in [1, D]");
    LinearGaussianSpec spec;
    spec.C = MatrixXd::Zero(p.D, p.D);
    spec.C.diagonal().head(Mr).setOnes();
    spec.Ctilde = MatrixXd::Identity(p.D, p.D);
    spec.beta = res.beta;
    spec.noise = p.noise;
    spec.lambda = p.lambda;

    DiagonalLinearSpec ds;
    ds.M_r = Mr;
    ds.M_s = ds.N = ds.M = ds.D = p.D;
    ds.beta = res.beta;
    ds.noise = p.noise;
    ds.lambda = p.lambda;

    Fig3aCurve c;
    c.M_r = Mr;
    c.P = P;
    c.theory.resize(P.size());
    c.closed_form.resize(P.size());
    parallel_for(static_cast<long>(P.size()), [&](long i) {
      c.theory[i] = gaussian_linear_Eg(spec, P[i]);
      c.closed_form[i] = diagonal_linear_Eg(ds, P[i]).Eg;
    });
    if (p.trials > 0) {
      ExperimentConfig ec;
      ec.P_grid = p.P_grid;
      ec.trials = p.trials;
      ec.master_seed = derive_seed(seed, "fig3a", static_cast<std::uint64_t>(Mr));
      ec.lambda = p.lambda;
      ec.noise = p.noise;
      c.empirical = run_linear_gaussian_curve(spec, ec);
      c.compare = compare_report(P, theory_Eg(c.theory), c.empirical);
      res.artifacts.add("fig3a_Mr" + std::to_string(Mr) + "_empirical.csv",
                        csv_string(empirical_columns(), empirical_rows(c.empirical)));
    }
    res.artifacts.add("fig3a_Mr" + std::to_string(Mr) + "_theory.csv", csv_string(theory_columns(), theory_rows(P, c.theory)));
    Json entry{{"M_r", Mr}, {"irreducible", c.theory.back().irreducible}, {"Eg_last", c.theory.back().Eg}};
    if (p.trials > 0) entry["compare"] = compare_json(c.compare);
    report["curves"].push_back(entry);
    res.curves.push_back(std::move(c));
  }
  MatrixXd b(p.D, 2);
  for (Index i = 0; i < p.D; ++i) b.row(i) << static_cast<double>(i), res.beta(i);
  res.artifacts.files.insert(res.artifacts.files.begin(), {"fig3a_beta.csv", csv_string({"index", "beta"}, b)});
  res.artifacts.add("fig3a_report.json", report.dump(2) + "\n");
  return res;
}

// ---------------------------------------------------------------- fig3b

Fig3bResult run_fig3b(const Fig3bParams& p, std::uint64_t seed) {
  require_grid(p.P_grid, "fig3b");
  require(p.N >= 1 && p.N <= p.D, "fig3b: N must lie in [1, D]");
  Fig3bResult res;
  res.beta = draw_beta(p.D, p.N, 0, 0.0, p.normalize_beta, p.beta_seed);
  const std::vector<double> P = as_doubles(p.P_grid);
  Json report{{"figure", "fig3b"}, {"curves", Json::array()}};
  for (Index Mr : p.M_r_list) {
    require(Mr >= 1 && Mr <= p.D, "fig3b: M_r must lie in [1, D]");
    std::vector<std::pair<double, bool>> lambdas;
    for (double l : p.lambda_list) lambdas.emplace_back(l, false);
    if (p.include_optimal_lambda) lambdas.emplace_back(optimal_ridge(Mr, p.D, p.noise), true);
    for (std::size_t li = 0; li < lambdas.size(); ++li) {
      DiagonalLinearSpec ds;
      ds.M_r = Mr;
      ds.M_s = ds.M = ds.D = p.D;
      ds.N = p.N;
      ds.beta = res.beta;
      ds.noise = p.noise;
      ds.lambda = lambdas[li].first;
      ds.normalized = p.normalize_beta;

      Fig3bCurve c;
      c.M_r = Mr;
      c.lambda = lambdas[li].first;
      c.optimal = lambdas[li].second;
      c.P = P;
      for (double x : P) c.theory.push_back(diagonal_linear_Eg(ds, x));
      const std::string stem = "fig3b_Mr" + std::to_string(Mr) + "_lambda" + (c.optimal ? "opt" : label(c.lambda));
      res.artifacts.add(stem + "_theory.csv", csv_string(kDiagonalColumns, diagonal_rows(P, c.lambda, c.theory)));
      Json entry{{"M_r", Mr}, {"lambda", c.lambda}, {"optimal", c.optimal}};
      std::vector<double> diverged_at;
      for (std::size_t i = 0; i < P.size(); ++i)
        if (c.theory[i].diverged) diverged_at.push_back(P[i]);
      entry["diverged_at"] = diverged_at;
      if (p.trials > 0 && c.lambda > 0) {
        LinearGaussianSpec spec;
        spec.C = MatrixXd::Zero(p.D, p.D);
        spec.C.diagonal().head(Mr).setOnes();
        spec.Ctilde = MatrixXd::Identity(p.D, p.D);
        spec.beta = res.beta;
        spec.noise = p.noise;
        spec.lambda = c.lambda;
        ExperimentConfig ec;
        ec.P_grid = p.P_grid;
        ec.trials = p.trials;
        ec.master_seed = derive_seed(seed, "fig3b", static_cast<std::uint64_t>(Mr), li);
        ec.lambda = c.lambda;
        ec.noise = p.noise;
        c.empirical = run_linear_gaussian_curve(spec, ec);
        res.artifacts.add(stem + "_empirical.csv", csv_string(empirical_columns(), empirical_rows(c.empirical)));
        std::vector<double> Eg;
        for (const auto& r : c.theory) Eg.push_back(r.Eg);
        entry["compare"] = curve_summary(compare_report(P, Eg, c.empirical));
      }
      report["curves"].push_back(entry);
      res.curves.push_back(std::move(c));
    }
  }
  res.artifacts.add("fig3b_report.json", report.dump(2) + "\n");
  return res;
}

// ---------------------------------------------------------------- figSI3

FigSI3Result run_figSI3(const FigSI3Params& p, std::uint64_t seed) {
  require_grid(p.P_grid, "figSI3");
  require(!p.cases.empty(), "figSI3: no cases");
  FigSI3Result res;
  res.beta = draw_beta(p.D, p.D, 0, 0.0, false, p.beta_seed);
  const std::vector<double> P = as_doubles(p.P_grid);
  Json report{{"figure", "figSI3"}, {"curves", Json::array()}};
  for (std::size_t ci = 0; ci < p.cases.size(); ++ci) {
    const LinearCase& lc = p.cases[ci];
    require(lc.N >= 1 && lc.N <= p.D, "figSI3: N must lie in [1, D]");
    VectorXd beta = res.beta;
    beta.tail(p.D - lc.N).setZero();
    beta /= beta.norm();

    DiagonalLinearSpec ds;
    ds.sigma2 = p.sigma2;
    ds.sigma2tilde = p.sigma2tilde;
    ds.M_r = lc.M_r;
    ds.M_s = lc.M_s;
    ds.N = lc.N;
    ds.M = lc.M;
    ds.D = p.D;
    ds.beta = beta;
    ds.noise = lc.noise;
    ds.lambda = p.lambda;

    FigSI3Curve c;
    c.spec = lc;
    c.P = P;
    for (double x : P) c.closed_form.push_back(general_linear_Eg(ds, x));

    // Discretized measures: Gaussian samples, optionally moment matched.
    VectorXd var_r = VectorXd::Zero(p.D), var_s = VectorXd::Zero(p.D);
    var_r.head(lc.M_r).setConstant(p.sigma2);
    var_s.head(lc.M_s).setConstant(p.sigma2tilde);
    MatrixXd Xr = synth_sample(SyntheticSpec::gaussian(var_r), p.points, derive_seed(seed, "figSI3_train", ci));
    MatrixXd Xs = synth_sample(SyntheticSpec::gaussian(var_s), p.points, derive_seed(seed, "figSI3_test", ci));
    if (p.moment_match) {
      Xr = moment_match(Xr, var_r);
      Xs = moment_match(Xs, var_s);
    }
    const KernelSpec kern = KernelSpec::linear(p.D, lc.M);
    const MatrixXd K = gram(kern, Xr);
    const DiscreteMeasure train = uniform_measure(p.points);
    const SpectralDecomposition dec = mercer_decompose(K, train);
    const TargetProjection abar = project_target(dec, Xr * beta, train);
    c.rank = dec.rank;
    c.pipeline = curve_on_points(dec, abar, gram(kern, Xs, Xr), Xs * beta, P, p.lambda, lc.noise);
    for (std::size_t i = 0; i < P.size(); ++i) {
      const double a = c.closed_form[i].Eg, b = c.pipeline[i].Eg;
      const double gap = a == b ? 0.0 : std::abs(b - a) / std::max(std::abs(a), 1e-300);
      c.max_relative_gap = std::max(c.max_relative_gap, gap);
    }
    MatrixXd rows(static_cast<Index>(P.size()), 4);
    for (std::size_t i = 0; i < P.size(); ++i)
      rows.row(static_cast<Index>(i)) << P[i], c.closed_form[i].Eg, c.pipeline[i].Eg,
          c.closed_form[i].diverged ? 1.0 : 0.0;
    res.artifacts.add("figSI3_" + lc.name + ".csv", csv_string({"P", "Eg_closed_form", "Eg_pipeline", "diverged"}, rows));
    report["curves"].push_back(Json{{"name", lc.name},
                                    {"rank", c.rank},
                                    {"max_relative_gap", c.max_relative_gap},
                                    {"irreducible", c.closed_form.back().irreducible},
                                    {"effective_noise", c.closed_form.back().effective_noise}});
    res.curves.push_back(std::move(c));
  }
  res.artifacts.add("figSI3_report.json", report.dump(2) + "\n");
  return res;
}

// ---------------------------------------------------------------- figSI4

FigSI4Result run_figSI4(const FigSI4Params& p, std::uint64_t seed) {
  require_grid(p.P_grid, "figSI4");
  FigSI4Result res;
  const KernelSpec kern = KernelSpec::ntk_relu(p.depth);
  const MatrixXd Z = synth_sample(SyntheticSpec::sphere(1.0, p.D), p.points, derive_seed(seed, "figSI4_points"));
  const MatrixXd centers = synth_sample(SyntheticSpec::sphere(1.0, p.D), p.centers, derive_seed(seed, "figSI4_centers"));
  auto target = [&](const MatrixXd& X) -> MatrixXd { return gram(kern, X, centers).rowwise().sum(); };

  const MatrixXd T = synth_sample(SyntheticSpec::sphere(1.0, p.D), p.test_points, derive_seed(seed, "figSI4_test"));

  // Theory from the uniform measure on the pool; experiments draw fresh
  // sphere points, since resampling a finite pool repeats points.
  const MatrixXd K = gram(kern, Z);
  const MatrixXd Y = target(Z);
  const DiscreteMeasure train = uniform_measure(p.points);
  const SpectralDecomposition dec = mercer_decompose(K, train);
  const TargetProjection abar = project_target(dec, Y, train);
  res.rank = dec.rank;
  const std::vector<double> P = as_doubles(p.P_grid);
  Json report{{"figure", "figSI4"}, {"rank", dec.rank}, {"curves", Json::array()}};

  for (double Rt : p.radii) {
    FigSI4Curve c;
    c.radius = Rt;
    c.P = P;
    SampledProblem prob;
    prob.train = SyntheticSpec::sphere(1.0, p.D);
    prob.kernel = kern;
    prob.target = target;
    prob.X_test = Rt * T;
    prob.Y_test = target(prob.X_test);
    c.theory = curve_on_points(dec, abar, gram(kern, prob.X_test, Z), prob.Y_test, P, p.lambda, p.noise);
    const std::string stem = "figSI4_R" + label(Rt);
    res.artifacts.add(stem + "_theory.csv", csv_string(theory_columns(), theory_rows(P, c.theory)));
    Json entry{{"radius", Rt}};
    if (p.trials > 0) {
      ExperimentConfig ec;
      ec.P_grid = p.P_grid;
      ec.trials = p.trials;
      // shared across radii so both curves see the same training sets
      ec.master_seed = derive_seed(seed, "figSI4_trials");
      ec.lambda = p.lambda;
      ec.noise = p.noise;
      c.empirical = run_sampled_curve(ec, prob);
      c.compare = compare_report(P, theory_Eg(c.theory), c.empirical);
      res.artifacts.add(stem + "_empirical.csv", csv_string(empirical_columns(), empirical_rows(c.empirical)));
      entry["compare"] = compare_json(c.compare);
    }
    report["curves"].push_back(entry);
    res.curves.push_back(std::move(c));
  }

  const int depth = p.depth;
  res.spectrum = dot_product_spectrum([depth](double t) { return ntk_relu_profile(depth, t); }, p.D,
                                      p.spectrum_degree, 256);
  MatrixXd spec(res.spectrum.size(), 4);
  for (Index k = 0; k < res.spectrum.size(); ++k) {
    const double N = sphere_degeneracy(p.D, k);
    spec.row(k) << static_cast<double>(k), N, res.spectrum(k), N * res.spectrum(k);
  }
  res.artifacts.add("figSI4_spectrum.csv", csv_string({"k", "degeneracy", "eta", "eta_bar"}, spec));
  res.artifacts.add("figSI4_report.json", report.dump(2) + "\n");
  return res;
}

// ---------------------------------------------------------------- figSI5

double fourier_target(double x, int modes, double theta) {
  double s = 0.0;
  for (int k = 1; k <= modes; ++k)
    s += 4.0 * std::cyl_bessel_i(static_cast<double>(k), 1.0) * std::cos(k * theta) * std::cos(k * M_PI * x);
  return s;
}

FigSI5Result run_figSI5(const FigSI5Params& p, std::uint64_t seed) {
  require_grid(p.P_grid, "figSI5");
  require(p.points >= 2 && p.test_points >= 2, "figSI5: need at least two points per grid");
  FigSI5Result res;
  const KernelSpec kern = KernelSpec::fourier(p.modes);
  auto linspace = [](double lo, double hi, Index n) {
    MatrixXd X(n, 1);
    for (Index i = 0; i < n; ++i) X(i, 0) = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    return X;
  };
  auto targets = [&](const MatrixXd& X) {
    MatrixXd Y(X.rows(), 1);
    for (Index i = 0; i < X.rows(); ++i) Y(i, 0) = fourier_target(X(i, 0), p.modes, p.theta);
    return Y;
  };
  const MatrixXd Xt = linspace(-p.test_halfwidth, p.test_halfwidth, p.test_points);
  const MatrixXd Yt = targets(Xt);
  const std::vector<double> P = as_doubles(p.P_grid);
  const double a = p.train_halfwidth;

  std::vector<std::pair<std::string, MatrixXd>> inputs;
  inputs.emplace_back("rectangular", linspace(-a, a, p.points));
  VectorXd var(1);
  var << a * a / 3.0;
  inputs.emplace_back("gaussian", synth_sample(SyntheticSpec::gaussian(var), p.points, derive_seed(seed, "figSI5_gaussian")));

  Json report{{"figure", "figSI5"}, {"curves", Json::array()}};
  for (auto& [name, X] : inputs) {
    FigSI5Curve c;
    c.name = name;
    const DiscreteMeasure train = uniform_measure(p.points);
    const SpectralDecomposition dec = mercer_decompose(gram(kern, X), train);
    const TargetProjection abar = project_target(dec, targets(X), train);
    const Index nominal = std::min<Index>(2 * p.modes, p.points);
    c.eigenvalues = dec.eigenvalues.head(nominal);
    c.rank = dec.rank;
    c.collapsed = nominal - std::min(nominal, dec.rank);
    c.P = P;
    c.theory = curve_on_points(dec, abar, gram(kern, Xt, X), Yt, P, p.lambda, p.noise);
    c.irreducible = c.theory.front().irreducible;
    MatrixXd ev(nominal, 3);
    for (Index k = 0; k < nominal; ++k)
      ev.row(k) << static_cast<double>(k), c.eigenvalues(k), k < dec.rank ? 1.0 : 0.0;
    res.artifacts.add("figSI5_" + name + "_eigenvalues.csv", csv_string({"mode", "eigenvalue", "in_rkhs"}, ev));
    res.artifacts.add("figSI5_" + name + "_theory.csv", csv_string(theory_columns(), theory_rows(P, c.theory)));
    report["curves"].push_back(
        Json{{"name", name}, {"rank", c.rank}, {"collapsed", c.collapsed}, {"irreducible", c.irreducible}});
    res.curves.push_back(std::move(c));
  }
  res.artifacts.add("figSI5_report.json", report.dump(2) + "\n");
  return res;
}

// ---------------------------------------------------------------- two clusters

TwoClusterData two_cluster_data(const TwoClusterParams& p, std::uint64_t seed) {
  require(p.points >= 2 && p.D >= 1, "two_cluster: need at least two points and one dimension");
  TwoClusterData d;
  d.X.resize(p.points, p.D);
  d.Y.resize(p.points, 1);
  auto gen = make_stream(seed, "two_cluster_points");
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Index i = 0; i < p.points; ++i) {
    const double y = i < p.points / 2 ? 1.0 : -1.0;
    for (Index j = 0; j < p.D; ++j) d.X(i, j) = normal(gen);
    d.X(i, 0) += p.separation * y;
    d.Y(i, 0) = y;
  }
  d.K = gram(KernelSpec::ntk_relu(p.depth), d.X);
  return d;
}

TwoClusterResult run_two_cluster(const TwoClusterParams& p, std::uint64_t seed) {
  const TwoClusterData data = two_cluster_data(p, seed);
  OptimizerConfig cfg;
  cfg.learning_rate = p.learning_rate;
  cfg.steps = p.steps;
  cfg.P_budget = static_cast<double>(p.P_budget);
  cfg.lambda = p.lambda;
  cfg.noise = p.noise;
  cfg.fd_step = p.fd_step;
  const DiscreteMeasure test = uniform_measure(p.points);

  TwoClusterResult res;
  res.trace = optimize_train_measure(data.K, data.Y, test, cfg);
  res.Eg_uniform = res.trace.Eg.front();
  res.Eg_optimized = res.trace.Eg.back();
  res.participation = res.trace.participation.back();

  MatrixXd tr(static_cast<Index>(res.trace.Eg.size()), 3);
  for (Index s = 0; s < tr.rows(); ++s) tr.row(s) << static_cast<double>(s), res.trace.Eg[s], res.trace.participation[s];
  res.artifacts.add("two_cluster_trace.csv", csv_string({"step", "Eg", "participation_ratio"}, tr));

  if (p.trials > 0) {
    ExperimentConfig ec;
    ec.P_grid = {p.P_budget};
    ec.trials = p.trials;
    ec.master_seed = derive_seed(seed, "two_cluster_trials");
    ec.lambda = p.lambda;
    ec.noise = p.noise;
    res.empirical_uniform = run_learning_curve(ec, discrete_problem(data.K, data.Y, uniform_measure(p.points), test));
    res.empirical_optimized = run_learning_curve(ec, discrete_problem(data.K, data.Y, res.trace.final_measure, test));
    MatrixXd rows(2, 6);
    rows.row(0) << 0.0, empirical_rows(res.empirical_uniform).row(0);
    rows.row(1) << 1.0, empirical_rows(res.empirical_optimized).row(0);
    res.artifacts.add("two_cluster_empirical.csv",
                      csv_string({"optimized", "P", "Eg_mean", "Eg_std", "Eg_stderr", "trials"}, rows));
  }

  const VectorXd& m = res.trace.final_measure.masses;
  std::vector<Index> order(static_cast<std::size_t>(m.size()));
  for (Index i = 0; i < m.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return m(a) > m(b); });
  MatrixXd sorted(m.size(), 4);
  for (Index r = 0; r < m.size(); ++r)
    sorted.row(r) << static_cast<double>(r), static_cast<double>(order[r]), m(order[r]), data.Y(order[r], 0);
  res.artifacts.add("two_cluster_sorted_masses.csv", csv_string({"rank", "index", "mass", "label"}, sorted));

  Json masses = Json::object();
  for (Index i = 0; i < m.size(); ++i) masses[std::to_string(i)] = m(i);
  res.artifacts.add("two_cluster_measure.json", masses.dump(2) + "\n");

  Json report{{"figure", "two_cluster"},
              {"Eg_uniform", res.Eg_uniform},
              {"Eg_optimized", res.Eg_optimized},
              {"ratio", res.Eg_optimized / res.Eg_uniform},
              {"participation_ratio", res.participation},
              {"accepted_steps", res.trace.accepted},
              {"converged", res.trace.converged}};
  if (p.trials > 0) {
    const EmpiricalPoint& u = res.empirical_uniform.points[0];
    const EmpiricalPoint& o = res.empirical_optimized.points[0];
    report["empirical_uniform"] = Json{{"mean", u.mean}, {"stderr", u.stderr_}};
    report["empirical_optimized"] = Json{{"mean", o.mean}, {"stderr", o.stderr_}};
  }
  res.artifacts.add("two_cluster_report.json", report.dump(2) + "\n");
  return res;
}

// ---------------------------------------------------------------- parameters

Fig3aParams fig3a_params(const Json& j) {
  Fig3aParams p;
  p.D = get_or<Index>(j, "D", p.D);
  p.M_r_list = index_list(j, "M_r_list", p.M_r_list);
  p.strong_modes = get_or<Index>(j, "strong_modes", p.strong_modes);
  p.weak_modes = get_or<Index>(j, "weak_modes", p.weak_modes);
  p.weak_variance = get_or<double>(j, "weak_variance", p.weak_variance);
  p.normalize_beta = get_or<bool>(j, "normalize_beta", p.normalize_beta);
  p.beta_seed = get_or<std::uint64_t>(j, "beta_seed", p.beta_seed);
  p.lambda = get_or<double>(j, "lambda", p.lambda);
  p.noise = get_or<double>(j, "noise", p.noise);
  p.P_grid = index_list(j, "P_grid", p.P_grid);
  p.trials = get_or<int>(j, "trials", p.trials);
  return p;
}

Fig3bParams fig3b_params(const Json& j) {
  Fig3bParams p;
  p.D = get_or<Index>(j, "D", p.D);
  p.M_r_list = index_list(j, "M_r_list", p.M_r_list);
  p.N = get_or<Index>(j, "N", p.N);
  p.normalize_beta = get_or<bool>(j, "normalize_beta", p.normalize_beta);
  p.beta_seed = get_or<std::uint64_t>(j, "beta_seed", p.beta_seed);
  p.noise = get_or<double>(j, "noise", p.noise);
  p.lambda_list = double_list(j, "lambda_list", p.lambda_list);
  p.include_optimal_lambda = get_or<bool>(j, "include_optimal_lambda", p.include_optimal_lambda);
  p.P_grid = index_list(j, "P_grid", p.P_grid);
  p.trials = get_or<int>(j, "trials", p.trials);
  return p;
}

FigSI3Params figSI3_params(const Json& j) {
  FigSI3Params p;
  p.D = get_or<Index>(j, "D", p.D);
  p.sigma2 = get_or<double>(j, "sigma2", p.sigma2);
  p.sigma2tilde = get_or<double>(j, "sigma2tilde", p.sigma2tilde);
  p.lambda = get_or<double>(j, "lambda", p.lambda);
  p.P_grid = index_list(j, "P_grid", p.P_grid);
  p.points = get_or<Index>(j, "points", p.points);
  p.moment_match = get_or<bool>(j, "moment_match", p.moment_match);
  p.beta_seed = get_or<std::uint64_t>(j, "beta_seed", p.beta_seed);
  const double noise = get_or<double>(j, "noise", 0.0);
  if (j.contains("cases")) {
    for (const auto& c : j["cases"]) {
      LinearCase lc;
      lc.name = c.at("name").get<std::string>();
      lc.M = get_or<Index>(c, "M", lc.M);
      lc.M_r = get_or<Index>(c, "M_r", lc.M_r);
      lc.M_s = get_or<Index>(c, "M_s", lc.M_s);
      lc.N = get_or<Index>(c, "N", lc.N);
      lc.noise = get_or<double>(c, "noise", noise);
      p.cases.push_back(lc);
    }
  }
  return p;
}

FigSI4Params figSI4_params(const Json& j) {
  FigSI4Params p;
  p.D = get_or<Index>(j, "D", p.D);
  p.depth = get_or<int>(j, "depth", p.depth);
  p.points = get_or<Index>(j, "points", p.points);
  p.test_points = get_or<Index>(j, "test_points", p.test_points);
  p.radii = double_list(j, "radii", p.radii);
  p.centers = get_or<Index>(j, "centers", p.centers);
  p.lambda = get_or<double>(j, "lambda", p.lambda);
  p.noise = get_or<double>(j, "noise", p.noise);
  p.P_grid = index_list(j, "P_grid", p.P_grid);
  p.trials = get_or<int>(j, "trials", p.trials);
  p.spectrum_degree = get_or<int>(j, "spectrum_degree", p.spectrum_degree);
  return p;
}

FigSI5Params figSI5_params(const Json& j) {
  FigSI5Params p;
  p.modes = get_or<int>(j, "modes", p.modes);
  p.train_halfwidth = get_or<double>(j, "train_halfwidth", p.train_halfwidth);
  p.test_halfwidth = get_or<double>(j, "test_halfwidth", p.test_halfwidth);
  p.points = get_or<Index>(j, "points", p.points);
  p.test_points = get_or<Index>(j, "test_points", p.test_points);
  p.theta = get_or<double>(j, "theta", p.theta);
  p.lambda = get_or<double>(j, "lambda", p.lambda);
  p.noise = get_or<double>(j, "noise", p.noise);
  p.P_grid = index_list(j, "P_grid", p.P_grid);
  return p;
}

TwoClusterParams two_cluster_params(const Json& j) {
  TwoClusterParams p;
  p.points = get_or<Index>(j, "points", p.points);
  p.D = get_or<Index>(j, "D", p.D);
  p.separation = get_or<double>(j, "separation", p.separation);
  p.depth = get_or<int>(j, "depth", p.depth);
  p.lambda = get_or<double>(j, "lambda", p.lambda);
  p.noise = get_or<double>(j, "noise", p.noise);
  p.P_budget = get_or<Index>(j, "P_budget", p.P_budget);
  p.learning_rate = get_or<double>(j, "learning_rate", p.learning_rate);
  p.steps = get_or<int>(j, "steps", p.steps);
  p.fd_step = get_or<double>(j, "fd_step", p.fd_step);
  p.trials = get_or<int>(j, "trials", p.trials);
  return p;
}

std::string bundled_config(const std::string& figure) {
  for (const auto& [name, text] : assets::reproduce_configs)
    if (name == figure) return std::string(text);
  return {};
}

std::vector<std::string> bundled_figures() {
  std::vector<std::string> out;
  for (const auto& entry : assets::reproduce_configs) out.emplace_back(entry.first);
  return out;
}

Artifacts run_scenario(const Json& j, std::uint64_t seed, Json* summary) {
  const std::string figure = j.at("figure").get<std::string>();
  Artifacts out;
  if (figure == "fig3a") {
    out = run_fig3a(fig3a_params(j), seed).artifacts;
  } else if (figure == "fig3b") {
    out = run_fig3b(fig3b_params(j), seed).artifacts;
  } else if (figure == "figSI3") {
    out = run_figSI3(figSI3_params(j), seed).artifacts;
  } else if (figure == "figSI4") {
    out = run_figSI4(figSI4_params(j), seed).artifacts;
  } else if (figure == "figSI5") {
    out = run_figSI5(figSI5_params(j), seed).artifacts;
  } else if (figure == "two_cluster") {
    out = run_two_cluster(two_cluster_params(j), seed).artifacts;
  } else {
    fail(ErrorKind::validation, "unknown figure \"" + figure + "\"");
  }
  if (summary) {
    for (const auto& [name, text] : out.files)
      if (name.size() > 12 && name.compare(name.size() - 12, 12, "_report.json") == 0) *summary = Json::parse(text);
  }
  return out;
}

}  // namespace ksl
