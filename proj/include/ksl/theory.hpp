#pragma once

#include <string>
#include <vector>

#include "ksl/spectral.hpp"

namespace ksl {

struct SelfConsistentState {
  double kappa = 0.0;
  double gamma = 0.0;
  double gamma_prime = 0.0;
  double P = 0.0;
  double lambda = 0.0;
  bool ridgeless = false;  // lambda = 0 with P at or above the mode count: kappa = 0
  bool diverged = false;   // 1 - gamma < 1e-10
};

inline constexpr double kDivergenceGap = 1e-10;

enum class KappaMethod { newton, ode };

// Largest root of g(k) = k - lambda - sum_rho k eta_rho / (P eta_rho + k).
// g is convex and increasing past its root, so Newton started from the upper
// bound lambda + sum(eta) descends monotonically onto it; a bisection step
// guards the bracket. The ode method integrates dk/dt = -g(k) from the same
// start and is kept as a cross-check.
double solve_kappa(const VectorXd& eta, double P, double lambda, bool* ridgeless = nullptr,
                   KappaMethod method = KappaMethod::newton);

// |g(kappa)| / max(kappa, lambda, tiny)
double kappa_residual(const VectorXd& eta, double P, double lambda, double kappa);

// gamma' uses the diagonal of the overlap restricted to the given modes.
SelfConsistentState compute_state(const VectorXd& eta, const VectorXd& O_diag, double P, double lambda);
SelfConsistentState compute_state(const VectorXd& eta, const OverlapMatrix& O, double P, double lambda);

// Second moments of the test measure needed by the error formula, expressed
// through the in-RKHS eigenfunctions phi_in and the residual target
// r_c = y_c - sum_in abar phi, which carries every out-of-RKHS component.
struct TestMoments {
  MatrixXd O_in;         // r x r, E[phi_in phi_in^T]
  MatrixXd cross;        // r x C, E[phi_in r_c]
  VectorXd irreducible;  // C, E[r_c^2]
};

struct TheoryPrediction {
  double Eg = 0.0;
  double bias = 0.0;
  double variance = 0.0;
  double Eg_matched = 0.0;
  double delta = 0.0;
  double irreducible = 0.0;
  VectorXd Eg_per_output;
  SelfConsistentState state;
  bool diverged = false;
  std::string diagnostic;
  MatrixXd O_shifted;  // O - ((1-gamma')/(1-gamma)) I over the modes the overlap covers
};

// Core evaluator. eta_in and abar_in cover the in-RKHS modes; out_power_c is
// the training-measure power of output c on out-of-RKHS modes, which enters
// as effective noise. noise holds one label-noise variance per output.
TheoryPrediction predict_from_moments(const VectorXd& eta_in, const MatrixXd& abar_in, const VectorXd& out_power,
                                      const TestMoments& m, double P, double lambda, const VectorXd& noise);

// Full-overlap form: the test measure lives where every mode is defined.
TheoryPrediction predict_Eg(const SpectralDecomposition& dec, const TargetProjection& abar, const OverlapMatrix& O,
                            double P, double lambda, double noise);

TestMoments test_moments(const SpectralDecomposition& dec, const TargetProjection& abar, const MatrixXd& Phi_in_rows,
                         const MatrixXd& Y_rows, const VectorXd& weights);

// Test measure given by weights over arbitrary points, described by their
// in-RKHS eigenfunction rows (for instance from nystrom_extend) and clean
// target values.
TheoryPrediction predict_on_points(const SpectralDecomposition& dec, const TargetProjection& abar,
                                   const MatrixXd& Phi_in_rows, const MatrixXd& Y_rows, const VectorXd& weights,
                                   double P, double lambda, double noise);

// Test measure over the decomposition's own dataset points.
TheoryPrediction predict_on_dataset(const SpectralDecomposition& dec, const TargetProjection& abar, const MatrixXd& Y,
                                    const DiscreteMeasure& ptilde, double P, double lambda, double noise);

// Coefficients P eta abar / (P eta + kappa) of the dataset-averaged
// estimator (S x C); zero on out-of-RKHS modes.
MatrixXd expected_estimator(const SpectralDecomposition& dec, const TargetProjection& abar, double P, double kappa);

// Per-point error c with E_g(p~) = sum_mu p~_mu c_mu for every test measure
// over the points. Phi_rows holds all S modes (no NaN); the out-of-RKHS
// columns supply the residual target.
VectorXd pointwise_error_density(const SpectralDecomposition& dec, const TargetProjection& abar, double P,
                                 double lambda, double noise, const MatrixXd& Phi_rows);
// Same with in-RKHS rows plus clean targets at the points.
VectorXd pointwise_error_density_at(const SpectralDecomposition& dec, const TargetProjection& abar, double P,
                                    double lambda, double noise, const MatrixXd& Phi_in_rows, const MatrixXd& Y_rows);
VectorXd pointwise_error_density_serial(const SpectralDecomposition& dec, const TargetProjection& abar, double P,
                                        double lambda, double noise, const MatrixXd& Phi_in_rows,
                                        const MatrixXd& Y_rows);

// Theory curve over a P grid, evaluated in parallel.
std::vector<TheoryPrediction> theory_curve(const VectorXd& eta_in, const MatrixXd& abar_in, const VectorXd& out_power,
                                           const TestMoments& m, const std::vector<double>& P_grid, double lambda,
                                           const VectorXd& noise);

// Helpers shared by the above.
MatrixXd in_abar(const SpectralDecomposition& dec, const TargetProjection& abar);
VectorXd out_power(const SpectralDecomposition& dec, const TargetProjection& abar);

}  // namespace ksl
