#include "ksl/optimizer.hpp"

#include <cmath>
#include <limits>

#include "ksl/error.hpp"

namespace ksl {

void OptimizerConfig::validate() const {
  require(learning_rate > 0 && std::isfinite(learning_rate), "optimizer learning_rate must be positive");
  require(steps >= 1, "optimizer steps must be at least 1");
  require(P_budget >= 0, "optimizer P_budget must be >= 0");
  require(lambda >= 0 && noise >= 0, "optimizer lambda and noise must be >= 0");
  require(fd_step > 0, "optimizer fd_step must be positive");
  require(convergence_tol >= 0, "optimizer convergence_tol must be >= 0");
  require(max_halvings >= 0, "optimizer max_halvings must be >= 0");
}

double participation_ratio(const DiscreteMeasure& measure) {
  std::vector<double> sq(measure.size());
  for (Index i = 0; i < measure.size(); ++i) sq[i] = measure.masses(i) * measure.masses(i);
  return 1.0 / pairwise_sum(sq);
}

double get_loss(const VectorXd& z, const MatrixXd& K, const MatrixXd& Y, double lambda, double P, double noise,
                const DiscreteMeasure& test, double rank_threshold, double support_threshold) {
  require(z.size() == K.rows() && Y.rows() == K.rows() && test.size() == K.rows(), "get_loss: sizes differ");
  const DiscreteMeasure p = from_logits(z);
  const SpectralDecomposition dec = mercer_decompose(K, p, rank_threshold, support_threshold);
  const TargetProjection abar = project_target(dec, Y, p);
  const TheoryPrediction pred = predict_on_dataset(dec, abar, Y, test, P, lambda, noise);
  return pred.diverged ? std::numeric_limits<double>::infinity() : pred.Eg;
}

double get_loss(const VectorXd& z, const MatrixXd& K, const MatrixXd& Y, double lambda, double P, double noise) {
  return get_loss(z, K, Y, lambda, P, noise, uniform_measure(K.rows()));
}

namespace {

VectorXd fd_impl(const Objective& f, const VectorXd& z, double h, OptimizerConfig::FdScheme scheme, bool parallel) {
  const Index n = z.size();
  VectorXd g(n);
  const bool central = scheme == OptimizerConfig::FdScheme::central;
  const double f0 = central ? 0.0 : f(z);
  parallel_for(
      static_cast<long>(n),
      [&](long i) {
        VectorXd zp = z;
        zp(i) += h;
        if (central) {
          VectorXd zm = z;
          zm(i) -= h;
          g(i) = (f(zp) - f(zm)) / (2.0 * h);
        } else {
          g(i) = (f(zp) - f0) / h;
        }
      },
      parallel);
  return g;
}

}  // namespace

VectorXd fd_gradient(const Objective& f, const VectorXd& z, double h, OptimizerConfig::FdScheme scheme) {
  return fd_impl(f, z, h, scheme, true);
}

VectorXd fd_gradient_serial(const Objective& f, const VectorXd& z, double h, OptimizerConfig::FdScheme scheme) {
  return fd_impl(f, z, h, scheme, false);
}

RichardsonCheck richardson_check(const Objective& f, const VectorXd& z, double h) {
  RichardsonCheck r;
  r.central = fd_gradient(f, z, h, OptimizerConfig::FdScheme::central);
  const VectorXd f1 = fd_gradient(f, z, h, OptimizerConfig::FdScheme::forward);
  const VectorXd f2 = fd_gradient(f, z, 0.5 * h, OptimizerConfig::FdScheme::forward);
  r.richardson = 2.0 * f2 - f1;
  const double scale = r.central.norm();
  r.relative_error = scale > 0 ? (r.central - r.richardson).norm() / scale : (r.central - r.richardson).norm();
  return r;
}

OptimizationTrace optimize_logits(const Objective& f, const std::function<VectorXd(const VectorXd&)>& grad, Index M,
                                  const OptimizerConfig& config) {
  config.validate();
  const bool descent = config.mode == OptimizerConfig::Mode::descent;
  OptimizationTrace tr;
  VectorXd z = VectorXd::Zero(M);
  double E = f(z);
  if (!std::isfinite(E)) fail(ErrorKind::numerical, "optimizer: objective diverges at the uniform measure");
  auto record = [&](const VectorXd& zz, double e) {
    tr.logits.push_back(zz);
    tr.Eg.push_back(e);
    tr.participation.push_back(participation_ratio(from_logits(zz)));
  };
  record(z, E);
  for (int step = 0; step < config.steps; ++step) {
    const VectorXd g = grad(z);
    if (!g.allFinite()) {
      tr.diagnostic = "gradient not finite at step " + std::to_string(step);
      break;
    }
    const double sign = descent ? -1.0 : 1.0;
    double eta = config.learning_rate;
    bool accepted = false;
    VectorXd zn;
    double En = 0.0;
    for (int tries = 0; tries <= (config.backtracking ? config.max_halvings : 0); ++tries) {
      zn = z + sign * eta * g;
      En = f(zn);
      const bool ok = std::isfinite(En) && (!config.backtracking || (descent ? En <= E : En >= E));
      if (ok) {
        accepted = true;
        break;
      }
      eta *= 0.5;
    }
    if (!accepted) {
      tr.diagnostic = "no acceptable step at step " + std::to_string(step);
      break;
    }
    const double dz = (zn - z).cwiseAbs().maxCoeff();
    z = zn;
    E = En;
    ++tr.accepted;
    record(z, E);
    if (dz < config.convergence_tol) {
      tr.converged = true;
      break;
    }
  }
  tr.final_measure = from_logits(z);
  return tr;
}

OptimizationTrace optimize_train_measure(const MatrixXd& K, const MatrixXd& Y, const DiscreteMeasure& test,
                                         const OptimizerConfig& config) {
  require(config.target == OptimizerConfig::Target::train_measure, "optimize_train_measure: target must be train_measure");
  const Objective f = [&](const VectorXd& z) {
    return get_loss(z, K, Y, config.lambda, config.P_budget, config.noise, test, config.rank_threshold,
                    config.support_threshold);
  };
  const auto grad = [&](const VectorXd& z) { return fd_gradient(f, z, config.fd_step, config.fd_scheme); };
  return optimize_logits(f, grad, K.rows(), config);
}

double test_measure_loss(const VectorXd& c, const VectorXd& z) {
  require(c.size() == z.size(), "test_measure_loss: sizes differ");
  return from_logits(z).masses.dot(c);
}

VectorXd test_measure_gradient(const VectorXd& c, const VectorXd& z) {
  const VectorXd p = from_logits(z).masses;
  const double E = p.dot(c);
  return p.cwiseProduct((c.array() - E).matrix());
}

OptimizationTrace optimize_test_measure(const VectorXd& density, const OptimizerConfig& config) {
  require(config.target == OptimizerConfig::Target::test_measure, "optimize_test_measure: target must be test_measure");
  require(density.allFinite(), "optimize_test_measure: error density is not finite (divergent state)");
  const Objective f = [&](const VectorXd& z) { return test_measure_loss(density, z); };
  const auto grad = [&](const VectorXd& z) { return test_measure_gradient(density, z); };
  return optimize_logits(f, grad, density.size(), config);
}

OptimizationTrace optimize_test_measure(const SpectralDecomposition& dec, const TargetProjection& abar,
                                        const MatrixXd& Y, const OptimizerConfig& config) {
  const VectorXd c = pointwise_error_density_at(dec, abar, config.P_budget, config.lambda, config.noise,
                                                dec.Phi.leftCols(dec.rank), Y);
  if (!c.allFinite()) fail(ErrorKind::numerical, "optimize_test_measure: theory diverges at P_budget");
  return optimize_test_measure(c, config);
}

}  // namespace ksl
