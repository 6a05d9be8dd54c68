#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ksl/theory.hpp"

namespace ksl {

struct OptimizerConfig {
  enum class Mode { descent, ascent };
  enum class Target { train_measure, test_measure };
  enum class FdScheme { central, forward };

  double learning_rate = 1.0;
  int steps = 2000;
  Mode mode = Mode::descent;
  Target target = Target::train_measure;
  double P_budget = 30.0;
  double lambda = 0.0;
  double noise = 0.0;
  double fd_step = 1e-5;
  FdScheme fd_scheme = FdScheme::central;
  double convergence_tol = 1e-6;
  bool backtracking = true;
  int max_halvings = 20;
  double rank_threshold = kDefaultRankThreshold;
  // Relative mass below which a training point leaves the eigenproblem.
  double support_threshold = 1e-14;

  void validate() const;
};

struct OptimizationTrace {
  std::vector<VectorXd> logits;  // accepted iterates, starting with z = 0
  std::vector<double> Eg;
  std::vector<double> participation;
  DiscreteMeasure final_measure;
  bool converged = false;
  int accepted = 0;
  std::string diagnostic;
};

using Objective = std::function<double(const VectorXd&)>;

double participation_ratio(const DiscreteMeasure& measure);

// Theory E_g at P for the training measure softmax(z) against a fixed test
// measure over the same points (uniform when omitted). +inf on divergence.
double get_loss(const VectorXd& z, const MatrixXd& K, const MatrixXd& Y, double lambda, double P, double noise,
                const DiscreteMeasure& test, double rank_threshold = kDefaultRankThreshold,
                double support_threshold = 1e-14);
double get_loss(const VectorXd& z, const MatrixXd& K, const MatrixXd& Y, double lambda, double P, double noise = 0.0);

// Finite-difference gradient; coordinates are probed in parallel. The serial
// variant is the reference the parallel one must match exactly.
VectorXd fd_gradient(const Objective& f, const VectorXd& z, double h, OptimizerConfig::FdScheme scheme);
VectorXd fd_gradient_serial(const Objective& f, const VectorXd& z, double h, OptimizerConfig::FdScheme scheme);

struct RichardsonCheck {
  VectorXd central;     // step h
  VectorXd richardson;  // 2 D_fwd(h/2) - D_fwd(h)
  double relative_error = 0.0;  // |central - richardson| / |central|
};
RichardsonCheck richardson_check(const Objective& f, const VectorXd& z, double h);

// Gradient steps on logits against any objective, with optional halving
// backtracking. Used by both optimizers.
OptimizationTrace optimize_logits(const Objective& f, const std::function<VectorXd(const VectorXd&)>& grad,
                                  Index M, const OptimizerConfig& config);

OptimizationTrace optimize_train_measure(const MatrixXd& K, const MatrixXd& Y, const DiscreteMeasure& test,
                                         const OptimizerConfig& config);

// E_g(p~) = p~ . c is linear in the test measure, so its logit gradient is
// p~ * (c - E_g).
double test_measure_loss(const VectorXd& c, const VectorXd& z);
VectorXd test_measure_gradient(const VectorXd& c, const VectorXd& z);

OptimizationTrace optimize_test_measure(const VectorXd& density, const OptimizerConfig& config);
// Density over the decomposition's own points for the fixed training measure.
OptimizationTrace optimize_test_measure(const SpectralDecomposition& dec, const TargetProjection& abar,
                                        const MatrixXd& Y, const OptimizerConfig& config);

}  // namespace ksl
