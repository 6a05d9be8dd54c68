#include "ksl/empirical.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "ksl/error.hpp"
#include "ksl/io.hpp"
#include "ksl/rng.hpp"

namespace ksl {

namespace {

double relative_residual(const MatrixXd& A, const MatrixXd& x, const MatrixXd& y) {
  const double ny = y.norm();
  const double r = (A * x - y).norm();
  return ny > 0 ? r / ny : r;
}

MatrixXd pinv_solve(const MatrixXd& A, const MatrixXd& y, Index* rank) {
  SymmetricEigen eig = symmetric_eigen(0.5 * (A + A.transpose()));
  const double top = eig.values.size() ? std::max(eig.values(0), 0.0) : 0.0;
  const double cut = 1e-12 * top * static_cast<double>(A.rows());
  Index r = 0;
  while (r < eig.values.size() && eig.values(r) > cut) ++r;
  *rank = r;
  const MatrixXd V = eig.vectors.leftCols(r);
  return V * eig.values.head(r).cwiseInverse().asDiagonal() * (V.transpose() * y);
}

}  // namespace

MatrixXd krr_coefficients(const MatrixXd& K_train, const MatrixXd& y_train, double lambda, KrrInfo* info) {
  const Index P = K_train.rows();
  require(K_train.cols() == P && y_train.rows() == P, "krr: training shapes differ");
  require(lambda >= 0, "krr: lambda must be >= 0");
  KrrInfo local;
  KrrInfo& inf = info ? *info : local;
  inf = KrrInfo{};
  inf.rank = P;
  MatrixXd A = K_train;
  A.diagonal().array() += lambda;
  Eigen::LLT<MatrixXd> llt(A);
  MatrixXd alpha;
  bool ok = llt.info() == Eigen::Success;
  if (ok) {
    alpha = llt.solve(y_train);
    for (int refine = 0; refine < 2; ++refine) {
      inf.residual = relative_residual(A, alpha, y_train);
      if (inf.residual < 1e-12) break;
      alpha += llt.solve(y_train - A * alpha);
    }
    inf.residual = relative_residual(A, alpha, y_train);
    ok = alpha.allFinite() && (lambda > 0 || inf.residual < 1e-10);
  }
  if (!ok) {
    if (lambda > 0) fail(ErrorKind::numerical, "krr: Cholesky failed with lambda > 0 (Gram matrix not PSD?)");
    inf.pseudo_inverse = true;
    alpha = pinv_solve(A, y_train, &inf.rank);
    inf.residual = relative_residual(A, alpha, y_train);
  }
  return alpha;
}

MatrixXd krr_solve(const MatrixXd& K_train, const MatrixXd& y_train, double lambda, const MatrixXd& K_cross,
                   KrrInfo* info) {
  require(K_cross.cols() == K_train.rows(), "krr: cross Gram columns differ from training size");
  return K_cross * krr_coefficients(K_train, y_train, lambda, info);
}

void ExperimentConfig::validate() const {
  require(trials >= 1, "experiment trials must be at least 1");
  require(!P_grid.empty(), "experiment P grid is empty");
  for (Index P : P_grid) require(P >= 1, "experiment P values must be at least 1");
  require(lambda >= 0 && noise >= 0, "experiment lambda and noise must be >= 0");
}

KrrProblem discrete_problem(const MatrixXd& K, const MatrixXd& Y, const DiscreteMeasure& train,
                            const DiscreteMeasure& test) {
  require(K.rows() == K.cols() && Y.rows() == K.rows(), "discrete_problem: shapes differ");
  require(train.size() == K.rows() && test.size() == K.rows(), "discrete_problem: measure lengths differ");
  KrrProblem p;
  p.K = K;
  p.Y = Y;
  p.train = train;
  const auto support = test.support();
  const Index Q = static_cast<Index>(support.size());
  p.K_test.resize(Q, K.cols());
  p.Y_test.resize(Q, Y.cols());
  p.test_weights.resize(Q);
  for (Index q = 0; q < Q; ++q) {
    p.K_test.row(q) = K.row(support[q]);
    p.Y_test.row(q) = Y.row(support[q]);
    p.test_weights(q) = test.masses(support[q]);
  }
  return p;
}

namespace {

void check_memory(const ExperimentConfig& config, Index per_trial_cells) {
  const double bytes = 8.0 * static_cast<double>(per_trial_cells) * 4.0;
  if (bytes > config.memory_budget_bytes)
    fail(ErrorKind::domain, "experiment refused: one trial needs about " + std::to_string(bytes / 1e9) +
                                " GB, above the memory budget of " + std::to_string(config.memory_budget_bytes / 1e9) +
                                " GB");
}

VectorXd noise_vector(const ExperimentConfig& config, Index n, Index P, int trial) {
  VectorXd e = VectorXd::Zero(n);
  if (config.noise <= 0) return e;
  auto gen = make_stream(config.master_seed, "label_noise", static_cast<std::uint64_t>(P),
                         static_cast<std::uint64_t>(trial));
  std::normal_distribution<double> normal(0.0, std::sqrt(config.noise));
  for (Index i = 0; i < n; ++i) e(i) = normal(gen);
  return e;
}

template <class TrialFn>
EmpiricalCurve aggregate(const ExperimentConfig& config, TrialFn&& trial_fn, bool parallel) {
  const long nP = static_cast<long>(config.P_grid.size());
  const long T = config.trials;
  std::vector<double> slots(static_cast<std::size_t>(nP * T));
  parallel_for(
      nP * T, [&](long u) { slots[u] = trial_fn(config.P_grid[u / T], static_cast<int>(u % T)); }, parallel);
  EmpiricalCurve curve;
  curve.seed = config.master_seed;
  for (long i = 0; i < nP; ++i) {
    const std::span<const double> block(slots.data() + i * T, static_cast<std::size_t>(T));
    const MeanStd ms = mean_std(block);
    EmpiricalPoint pt;
    pt.P = config.P_grid[i];
    pt.mean = ms.mean;
    pt.std = ms.std;
    pt.stderr_ = ms.std / std::sqrt(static_cast<double>(T));
    pt.trials = static_cast<int>(T);
    curve.points.push_back(pt);
  }
  return curve;
}

}  // namespace

double krr_trial_error(const KrrProblem& problem, const ExperimentConfig& config, Index P, int trial) {
  const std::vector<Index> idx = sample_indices(
      problem.train, P,
      derive_seed(config.master_seed, "train_sample", static_cast<std::uint64_t>(P), static_cast<std::uint64_t>(trial)));
  const Index C = problem.Y.cols();
  MatrixXd Kt(P, P), y(P, C), Kc(problem.K_test.rows(), P);
  for (Index b = 0; b < P; ++b) {
    for (Index a = 0; a < P; ++a) Kt(a, b) = problem.K(idx[a], idx[b]);
    Kc.col(b) = problem.K_test.col(idx[b]);
  }
  for (Index a = 0; a < P; ++a) y.row(a) = problem.Y.row(idx[a]);
  for (Index c = 0; c < C; ++c) y.col(c) += noise_vector(config, P, P, trial * static_cast<int>(C) + static_cast<int>(c));
  const MatrixXd f = krr_solve(Kt, y, config.lambda, Kc);
  const MatrixXd err = f - problem.Y_test;
  return (err.array().square().rowwise().sum().matrix().transpose() * problem.test_weights)(0);
}

std::vector<std::vector<double>> krr_trial_errors(const ExperimentConfig& config, const KrrProblem& problem,
                                                  bool parallel) {
  config.validate();
  const long nP = static_cast<long>(config.P_grid.size());
  const long T = config.trials;
  std::vector<std::vector<double>> out(nP, std::vector<double>(T));
  parallel_for(
      nP * T,
      [&](long u) { out[u / T][u % T] = krr_trial_error(problem, config, config.P_grid[u / T], static_cast<int>(u % T)); },
      parallel);
  return out;
}

namespace {

EmpiricalCurve run_krr(const ExperimentConfig& config, const KrrProblem& problem, bool parallel) {
  config.validate();
  require(problem.K.rows() == problem.K.cols() && problem.Y.rows() == problem.K.rows(), "experiment: shapes differ");
  require(problem.train.size() == problem.K.rows(), "experiment: training measure length differs");
  require(problem.K_test.cols() == problem.K.rows() && problem.Y_test.rows() == problem.K_test.rows() &&
              problem.test_weights.size() == problem.K_test.rows() && problem.Y_test.cols() == problem.Y.cols(),
          "experiment: test shapes differ");
  problem.train.validate();
  Index maxP = 0;
  for (Index P : config.P_grid) maxP = std::max(maxP, P);
  check_memory(config, maxP * maxP + maxP * problem.K_test.rows());
  return aggregate(
      config, [&](Index P, int t) { return krr_trial_error(problem, config, P, t); }, parallel);
}

}  // namespace

EmpiricalCurve run_learning_curve(const ExperimentConfig& config, const KrrProblem& problem) {
  return run_krr(config, problem, true);
}

EmpiricalCurve run_learning_curve_serial(const ExperimentConfig& config, const KrrProblem& problem) {
  return run_krr(config, problem, false);
}

namespace {

MatrixXd sqrt_psd(const MatrixXd& C) {
  SymmetricEigen eig = symmetric_eigen(0.5 * (C + C.transpose()));
  const VectorXd s = eig.values.cwiseMax(0.0).cwiseSqrt();
  return eig.vectors * s.asDiagonal() * eig.vectors.transpose();
}

double linear_trial(const LinearGaussianSpec& spec, const MatrixXd& root, const ExperimentConfig& config, Index P,
                    int trial) {
  const Index D = spec.D();
  auto gen = make_stream(config.master_seed, "gaussian_inputs", static_cast<std::uint64_t>(P),
                         static_cast<std::uint64_t>(trial));
  std::normal_distribution<double> normal(0.0, 1.0);
  MatrixXd Z(P, D);
  for (Index i = 0; i < P; ++i)
    for (Index j = 0; j < D; ++j) Z(i, j) = normal(gen);
  const MatrixXd X = Z * root;
  VectorXd y = X * spec.beta + noise_vector(config, P, P, trial);
  const MatrixXd K = X * X.transpose() / static_cast<double>(D);
  const VectorXd alpha = krr_coefficients(K, y, config.lambda);
  const VectorXd w = X.transpose() * alpha / static_cast<double>(D);
  const VectorXd e = w - spec.beta;
  return e.dot(spec.Ctilde * e);
}

EmpiricalCurve run_linear(const LinearGaussianSpec& spec, const ExperimentConfig& config, bool parallel) {
  config.validate();
  spec.validate();
  Index maxP = 0;
  for (Index P : config.P_grid) maxP = std::max(maxP, P);
  check_memory(config, maxP * maxP + maxP * spec.D());
  const MatrixXd root = sqrt_psd(spec.C);
  return aggregate(
      config, [&](Index P, int t) { return linear_trial(spec, root, config, P, t); }, parallel);
}

}  // namespace

double linear_gaussian_trial_error(const LinearGaussianSpec& spec, const ExperimentConfig& config, Index P, int trial) {
  return linear_trial(spec, sqrt_psd(spec.C), config, P, trial);
}

EmpiricalCurve run_linear_gaussian_curve(const LinearGaussianSpec& spec, const ExperimentConfig& config) {
  return run_linear(spec, config, true);
}

EmpiricalCurve run_linear_gaussian_curve_serial(const LinearGaussianSpec& spec, const ExperimentConfig& config) {
  return run_linear(spec, config, false);
}

double sampled_trial_error(const SampledProblem& problem, const ExperimentConfig& config, Index P, int trial) {
  const MatrixXd X = synth_sample(
      problem.train, P,
      derive_seed(config.master_seed, "train_inputs", static_cast<std::uint64_t>(P), static_cast<std::uint64_t>(trial)));
  MatrixXd y = problem.target(X);
  const Index C = y.cols();
  for (Index c = 0; c < C; ++c) y.col(c) += noise_vector(config, P, P, trial * static_cast<int>(C) + static_cast<int>(c));
  const MatrixXd f = krr_solve(gram_serial(problem.kernel, X), y, config.lambda, gram_serial(problem.kernel, problem.X_test, X));
  return (f - problem.Y_test).array().square().sum() / static_cast<double>(problem.X_test.rows());
}

namespace {

EmpiricalCurve run_sampled(const ExperimentConfig& config, const SampledProblem& problem, bool parallel) {
  config.validate();
  require(static_cast<bool>(problem.target), "experiment: sampled problem has no target");
  require(problem.X_test.rows() > 0 && problem.Y_test.rows() == problem.X_test.rows(),
          "experiment: test shapes differ");
  Index maxP = 0;
  for (Index P : config.P_grid) maxP = std::max(maxP, P);
  check_memory(config, maxP * maxP + maxP * problem.X_test.rows());
  return aggregate(
      config, [&](Index P, int t) { return sampled_trial_error(problem, config, P, t); }, parallel);
}

}  // namespace

EmpiricalCurve run_sampled_curve(const ExperimentConfig& config, const SampledProblem& problem) {
  return run_sampled(config, problem, true);
}

EmpiricalCurve run_sampled_curve_serial(const ExperimentConfig& config, const SampledProblem& problem) {
  return run_sampled(config, problem, false);
}

namespace {
std::string format_P(double P) { return format_double(P); }
}  // namespace

CompareReport compare_report(const std::vector<double>& P_theory, const std::vector<double>& Eg_theory,
                             const EmpiricalCurve& empirical, double z_limit, double required_fraction) {
  require(P_theory.size() == Eg_theory.size(), "compare: theory P and E_g lengths differ");
  if (P_theory.size() != empirical.points.size())
    fail(ErrorKind::domain, "compare: P grids differ in length (" + std::to_string(P_theory.size()) + " vs " +
                                std::to_string(empirical.points.size()) + ")");
  CompareReport rep;
  rep.z_limit = z_limit;
  std::size_t within = 0;
  for (std::size_t i = 0; i < P_theory.size(); ++i) {
    const EmpiricalPoint& e = empirical.points[i];
    if (P_theory[i] != static_cast<double>(e.P))
      fail(ErrorKind::domain, "compare: P grids differ at entry " + std::to_string(i));
    CompareRow row;
    row.P = P_theory[i];
    row.theory = Eg_theory[i];
    row.mean = e.mean;
    row.stderr_ = e.stderr_;
    const double diff = row.theory - row.mean;
    if (e.stderr_ > 0) {
      row.z = diff / e.stderr_;
    } else if (diff == 0) {
      row.z = 0.0;
    } else {
      row.z = diff > 0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
      rep.diagnostics.push_back("P=" + format_P(row.P) + ": zero standard error with a mismatch");
    }
    if (std::isnan(row.z)) rep.diagnostics.push_back("P=" + format_P(row.P) + ": z-score undefined");
    if (std::abs(row.z) <= z_limit) ++within;
    rep.max_abs_z = std::max(rep.max_abs_z, std::isnan(row.z) ? std::numeric_limits<double>::infinity() : std::abs(row.z));
    rep.rows.push_back(row);
  }
  rep.fraction_within = rep.rows.empty() ? 0.0 : static_cast<double>(within) / static_cast<double>(rep.rows.size());
  rep.pass = !rep.rows.empty() && rep.fraction_within >= required_fraction;
  return rep;
}

}  // namespace ksl
