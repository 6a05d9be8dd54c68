#include "ksl/closedform.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ksl/error.hpp"

namespace ksl {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

double sum_sq(const VectorXd& v, Index from, Index to) {
  double s = 0.0;
  for (Index i = from; i < std::min(to, v.size()); ++i) s += v(i) * v(i);
  return s;
}
}  // namespace

void LinearGaussianSpec::validate() const {
  const Index n = D();
  require(n >= 1, "linear model needs D >= 1");
  require(C.rows() == n && C.cols() == n && Ctilde.rows() == n && Ctilde.cols() == n,
          "covariances must be D x D");
  require(C.allFinite() && Ctilde.allFinite() && beta.allFinite(), "linear model entries must be finite");
  require((C - C.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, C.cwiseAbs().maxCoeff()),
          "training covariance is not symmetric");
  require((Ctilde - Ctilde.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, Ctilde.cwiseAbs().maxCoeff()),
          "test covariance is not symmetric");
  require(noise >= 0 && lambda >= 0, "noise and lambda must be >= 0");
}

TheoryPrediction gaussian_linear_Eg(const LinearGaussianSpec& spec, double P) {
  spec.validate();
  const Index D = spec.D();
  SymmetricEigen eig = symmetric_eigen(0.5 * (spec.C + spec.C.transpose()));
  for (Index i = 0; i < D; ++i)
    require(eig.values(i) >= -1e-10 * std::max(1.0, eig.values(0)), "training covariance is not PSD");
  const VectorXd c = eig.values.cwiseMax(0.0);
  Index r = 0;
  while (r < D && c(r) > 1e-12 * c(0)) ++r;
  const MatrixXd& U = eig.vectors;
  const VectorXd b = U.transpose() * spec.beta;
  const MatrixXd Ct = U.transpose() * spec.Ctilde * U;

  VectorXd eta(r), sq(r);
  MatrixXd a_in(r, 1);
  for (Index i = 0; i < r; ++i) {
    eta(i) = c(i) / static_cast<double>(D);
    sq(i) = std::sqrt(c(i));
    a_in(i, 0) = sq(i) * b(i);
  }
  const VectorXd b_out = b.tail(D - r);
  TestMoments m;
  m.O_in = sq.cwiseInverse().asDiagonal() * Ct.topLeftCorner(r, r) * sq.cwiseInverse().asDiagonal();
  m.cross = sq.cwiseInverse().asDiagonal() * Ct.topRightCorner(r, D - r) * b_out;
  m.irreducible = VectorXd::Constant(1, b_out.dot(Ct.bottomRightCorner(D - r, D - r) * b_out));
  return predict_from_moments(eta, a_in, VectorXd::Zero(1), m, P, spec.lambda, VectorXd::Constant(1, spec.noise));
}

void DiagonalLinearSpec::validate() const {
  require(D >= 1, "diagonal model needs D >= 1");
  require(M_r >= 1 && M_r <= D, "M_r must lie in [1, D]");
  require(M_s >= 0 && M_s <= D, "M_s must lie in [0, D]");
  require(N >= 0 && N <= D, "N must lie in [0, D]");
  require(M >= 1 && M <= D, "M must lie in [1, D]");
  require(sigma2 > 0 && sigma2tilde > 0, "variances must be positive");
  require(noise >= 0 && lambda >= 0, "noise and lambda must be >= 0");
  require(beta.size() == D, "beta must have length D");
  require(beta.allFinite(), "beta must be finite");
  for (Index i = N; i < D; ++i) require(beta(i) == 0.0, "beta must vanish beyond N");
  if (normalized) require(std::abs(sum_sq(beta, 0, N) - 1.0) <= 1e-12, "beta is not normalized over the first N entries");
}

double kappa_prime_closed(double alpha, double lambda_tilde) {
  const double b = 1.0 + lambda_tilde - alpha;
  const double disc = std::sqrt(b * b + 4.0 * lambda_tilde * alpha);
  if (b >= 0) return 0.5 * (b + disc);
  return 2.0 * lambda_tilde * alpha / (disc - b);
}

double optimal_ridge(Index M_r, Index D, double noise) {
  require(M_r >= 1 && D >= M_r, "optimal_ridge: need D >= M_r >= 1");
  return static_cast<double>(M_r) / static_cast<double>(D) * noise;
}

DiagonalResult general_linear_Eg(const DiagonalLinearSpec& s, double P) {
  s.validate();
  require(P >= 0, "P must be >= 0");
  const Index Nr = std::min(s.M, s.M_r);
  const Index Nrs = std::min(Nr, s.M_s);
  DiagonalResult r;
  r.alpha = P / static_cast<double>(Nr);
  r.lambda_tilde = s.lambda / (s.sigma2 * std::min(1.0, static_cast<double>(s.M_r) / static_cast<double>(s.M)));
  r.kappa_prime = kappa_prime_closed(r.alpha, r.lambda_tilde);
  const double ka = r.kappa_prime + r.alpha;
  const double learn = ka > 0 ? r.kappa_prime * r.kappa_prime / (ka * ka) : 1.0;
  r.gamma = ka > 0 ? r.alpha / (ka * ka) : 0.0;
  const double ratio = s.sigma2tilde / s.sigma2;
  r.effective_noise = ratio * static_cast<double>(Nrs) / static_cast<double>(Nr) *
                      (s.noise + s.sigma2 * sum_sq(s.beta, Nr, s.M_r));
  r.irreducible = s.sigma2tilde * sum_sq(s.beta, Nrs, s.M_s);
  const double bias = s.sigma2tilde * learn * sum_sq(s.beta, 0, Nrs) + r.irreducible;
  const double num = r.effective_noise + static_cast<double>(Nrs) / static_cast<double>(Nr) * s.sigma2tilde * learn *
                                             sum_sq(s.beta, 0, Nr);
  r.diverged = 1.0 - r.gamma < kDivergenceGap;
  if (r.diverged) {
    r.Eg = num > 0 ? kInf : bias;
    if (num <= 0) r.diverged = false;
    return r;
  }
  r.Eg = r.gamma / (1.0 - r.gamma) * num + bias;
  return r;
}

DiagonalResult diagonal_linear_Eg(const DiagonalLinearSpec& s, double P) {
  if (s.M != s.D || s.M_s != s.D) return general_linear_Eg(s, P);
  s.validate();
  require(P >= 0, "P must be >= 0");
  DiagonalResult r;
  r.alpha = P / static_cast<double>(s.M_r);
  r.lambda_tilde = s.lambda / (s.sigma2 * static_cast<double>(s.M_r) / static_cast<double>(s.D));
  r.kappa_prime = kappa_prime_closed(r.alpha, r.lambda_tilde);
  const double ka = r.kappa_prime + r.alpha;
  r.gamma = ka > 0 ? r.alpha / (ka * ka) : 0.0;
  const double den = ka * ka - r.alpha;
  r.effective_noise = s.sigma2tilde / s.sigma2 * s.noise;
  r.irreducible = s.sigma2tilde * sum_sq(s.beta, s.M_r, s.D);
  const double S1 = sum_sq(s.beta, 0, s.M_r);
  r.diverged = 1.0 - r.gamma < kDivergenceGap;
  if (P == 0) {
    r.Eg = s.sigma2tilde * S1 + r.irreducible;
    return r;
  }
  if (r.diverged) {
    const bool blown = s.noise > 0 || (r.kappa_prime > 0 && S1 > 0);
    r.Eg = blown ? kInf : r.irreducible;
    r.diverged = blown;
    return r;
  }
  r.Eg = s.sigma2tilde * (s.noise / s.sigma2 * r.alpha / den + r.kappa_prime * r.kappa_prime / den * S1) + r.irreducible;
  return r;
}

double sphere_degeneracy(Index D, Index k) {
  require(D >= 2, "sphere_degeneracy: D must be at least 2");
  require(k >= 0, "sphere_degeneracy: degree must be >= 0");
  if (k == 0) return 1.0;
  // (2k + D - 2)/k * binom(k + D - 3, k - 1)
  double binom = 1.0;
  for (Index i = 1; i <= k - 1; ++i) binom = binom * static_cast<double>(D - 2 + i) / static_cast<double>(i);
  return std::round(static_cast<double>(2 * k + D - 2) / static_cast<double>(k) * binom);
}

void SphereNtkSpec::validate() const {
  require(eta_bar.size() == a2.size() && eta_bar.size() >= 1, "sphere spectra must have equal nonzero length");
  require(stage >= 0 && stage < eta_bar.size(), "sphere stage out of range");
  require(R > 0 && Rt > 0, "sphere radii must be positive");
  require(noise >= 0 && lambda >= 0, "noise and lambda must be >= 0");
  require(D >= 2, "sphere dimension must be at least 2");
  for (Index k = 0; k < eta_bar.size(); ++k)
    require(eta_bar(k) >= 0 && a2(k) >= 0 && std::isfinite(eta_bar(k)) && std::isfinite(a2(k)),
            "sphere spectra must be finite and >= 0");
}

SphereStageResult ntk_sphere_Eg(const SphereNtkSpec& s, double alpha_k) {
  s.validate();
  require(alpha_k >= 0, "alpha_k must be >= 0");
  const Index k = s.stage;
  require(s.eta_bar(k) > 0, "ntk_sphere_Eg: stage eigenvalue is zero");
  const Index K = s.eta_bar.size();
  const double tail_eta = s.eta_bar.tail(K - k - 1).sum();
  const double tail_a2 = s.a2.tail(K - k - 1).sum();
  SphereStageResult r;
  r.lambda_tilde = (s.lambda + tail_eta) / s.eta_bar(k);
  r.effective_noise = s.noise + tail_a2;
  r.kappa_prime = kappa_prime_closed(alpha_k, r.lambda_tilde);
  const double scale = (s.Rt * s.Rt) / (s.R * s.R);
  r.irreducible = scale * tail_a2;
  const double ka = r.kappa_prime + alpha_k;
  const double den = ka * ka - alpha_k;
  const double gamma = ka > 0 ? alpha_k / (ka * ka) : 0.0;
  if (1.0 - gamma < kDivergenceGap) {
    const bool blown = r.effective_noise > 0 || (r.kappa_prime > 0 && s.a2(k) > 0);
    r.diverged = blown;
    r.Eg = blown ? kInf : r.irreducible;
    return r;
  }
  if (alpha_k == 0) {
    r.Eg = scale * (s.a2(k) + tail_a2);
    return r;
  }
  r.Eg = scale * (r.effective_noise * alpha_k / den + r.kappa_prime * r.kappa_prime * s.a2(k) / den + tail_a2);
  return r;
}

}  // namespace ksl
