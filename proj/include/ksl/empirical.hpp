#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ksl/closedform.hpp"
#include "ksl/kernels.hpp"
#include "ksl/measures.hpp"

namespace ksl {

struct KrrInfo {
  bool pseudo_inverse = false;
  Index rank = 0;
  double residual = 0.0;  // |(K + lambda I) alpha - y| / |y|
};

// alpha = (K + lambda I)^{-1} y by Cholesky with iterative refinement; at
// lambda = 0 a singular system falls back to the pseudo-inverse.
MatrixXd krr_coefficients(const MatrixXd& K_train, const MatrixXd& y_train, double lambda, KrrInfo* info = nullptr);

// Predictions K_cross (K_train + lambda I)^{-1} y_train.
MatrixXd krr_solve(const MatrixXd& K_train, const MatrixXd& y_train, double lambda, const MatrixXd& K_cross,
                   KrrInfo* info = nullptr);

struct ExperimentConfig {
  std::vector<Index> P_grid;
  int trials = 30;
  std::uint64_t master_seed = 0;
  double lambda = 0.0;
  double noise = 0.0;
  double memory_budget_bytes = 4e9;

  void validate() const;
};

// Candidate training points with Gram K and clean targets Y, the training
// measure over them, and the test points as rows of K_test (test x
// candidates) with clean targets and test masses.
struct KrrProblem {
  MatrixXd K;
  MatrixXd Y;
  DiscreteMeasure train;
  MatrixXd K_test;
  MatrixXd Y_test;
  VectorXd test_weights;
};

// Test measure over the candidate points themselves.
KrrProblem discrete_problem(const MatrixXd& K, const MatrixXd& Y, const DiscreteMeasure& train,
                            const DiscreteMeasure& test);

struct EmpiricalPoint {
  Index P = 0;
  double mean = 0.0;
  double std = 0.0;
  double stderr_ = 0.0;
  int trials = 0;
};

struct EmpiricalCurve {
  std::vector<EmpiricalPoint> points;
  std::uint64_t seed = 0;
  std::string config_hash;
};

// One trial: draw P training indices from the training measure, add fresh
// label noise, fit, and return the exact test error against clean targets.
double krr_trial_error(const KrrProblem& problem, const ExperimentConfig& config, Index P, int trial);

// Trials for every (P, trial) pair run in parallel into fixed slots and are
// reduced in a fixed order, so the result does not depend on scheduling.
EmpiricalCurve run_learning_curve(const ExperimentConfig& config, const KrrProblem& problem);
EmpiricalCurve run_learning_curve_serial(const ExperimentConfig& config, const KrrProblem& problem);

// Linear kernel (1/D) x.x' on Gaussian inputs. The test error of a fitted
// weight vector w is computed exactly as (w - beta)^T Ctilde (w - beta).
double linear_gaussian_trial_error(const LinearGaussianSpec& spec, const ExperimentConfig& config, Index P, int trial);
EmpiricalCurve run_linear_gaussian_curve(const LinearGaussianSpec& spec, const ExperimentConfig& config);
EmpiricalCurve run_linear_gaussian_curve_serial(const LinearGaussianSpec& spec, const ExperimentConfig& config);

// Training inputs drawn fresh from a synthetic distribution in every trial
// and scored on fixed test points with uniform weights. Stands in for a
// continuous training measure, where resampling a finite pool would repeat
// points.
struct SampledProblem {
  SyntheticSpec train;
  KernelSpec kernel;
  std::function<MatrixXd(const MatrixXd&)> target;  // clean targets, one row per input
  MatrixXd X_test;
  MatrixXd Y_test;
};

double sampled_trial_error(const SampledProblem& problem, const ExperimentConfig& config, Index P, int trial);
EmpiricalCurve run_sampled_curve(const ExperimentConfig& config, const SampledProblem& problem);
EmpiricalCurve run_sampled_curve_serial(const ExperimentConfig& config, const SampledProblem& problem);

// Per-trial errors behind a curve, indexed [P][trial].
std::vector<std::vector<double>> krr_trial_errors(const ExperimentConfig& config, const KrrProblem& problem,
                                                  bool parallel = true);

struct CompareRow {
  double P = 0.0;
  double theory = 0.0;
  double mean = 0.0;
  double stderr_ = 0.0;
  double z = 0.0;
};

struct CompareReport {
  std::vector<CompareRow> rows;
  double max_abs_z = 0.0;
  double fraction_within = 0.0;
  double z_limit = 3.0;
  bool pass = false;
  std::vector<std::string> diagnostics;
};

// z = (theory - mean) / stderr per P. Grids must match exactly.
CompareReport compare_report(const std::vector<double>& P_theory, const std::vector<double>& Eg_theory,
                             const EmpiricalCurve& empirical, double z_limit = 3.0, double required_fraction = 0.9);

}  // namespace ksl
