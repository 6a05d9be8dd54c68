#include "ksl/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ksl/error.hpp"

namespace ksl {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double g_value(const VectorXd& eta, double P, double lambda, double k) {
  double s = 0.0;
  for (Index i = 0; i < eta.size(); ++i) {
    const double den = P * eta(i) + k;
    if (den > 0) s += eta(i) / den;
  }
  return k - lambda - k * s;
}

double g_slope(const VectorXd& eta, double P, double k) {
  double s = 0.0;
  for (Index i = 0; i < eta.size(); ++i) {
    const double den = P * eta(i) + k;
    if (den > 0) s += P * eta(i) * eta(i) / (den * den);
  }
  return 1.0 - s;
}

double solve_newton(const VectorXd& eta, double P, double lambda, double hi) {
  double lo = 0.0;
  double k = hi;
  for (int it = 0; it < 500; ++it) {
    const double g = g_value(eta, P, lambda, k);
    if (g <= 0.0) {
      // at or below the root: tighten the lower side
      if (g == 0.0) return k;
      lo = k;
    } else {
      hi = k;
    }
    const double slope = g_slope(eta, P, k);
    double next = slope > 0 ? k - g / slope : 0.5 * (lo + hi);
    if (!(next > lo && next < hi) || !std::isfinite(next)) next = 0.5 * (lo + hi);
    if (std::abs(next - k) <= 4e-16 * k) return next;
    k = next;
  }
  return k;
}

double solve_ode(const VectorXd& eta, double P, double lambda, double k) {
  // Plain RK4 on dk/dt = -g(k); g' = 1 - gamma lies in (0, 1], so unit steps are stable.
  const double dt = 1.0;
  for (long it = 0; it < 2000000; ++it) {
    const double k1 = -g_value(eta, P, lambda, k);
    const double k2 = -g_value(eta, P, lambda, k + 0.5 * dt * k1);
    const double k3 = -g_value(eta, P, lambda, k + 0.5 * dt * k2);
    const double k4 = -g_value(eta, P, lambda, k + dt * k3);
    const double next = k + dt * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0;
    if (std::abs(next - k) <= 1e-15 * std::max(next, 1e-300)) return next;
    k = next;
  }
  fail(ErrorKind::numerical, "solve_kappa: ODE integration did not settle");
}

}  // namespace

double solve_kappa(const VectorXd& eta, double P, double lambda, bool* ridgeless, KappaMethod method) {
  require(P >= 0 && std::isfinite(P), "solve_kappa: P must be finite and >= 0");
  require(lambda >= 0 && std::isfinite(lambda), "solve_kappa: lambda must be finite and >= 0");
  Index nonzero = 0;
  double total = 0.0;
  for (Index i = 0; i < eta.size(); ++i) {
    require(eta(i) >= 0 && std::isfinite(eta(i)), "solve_kappa: eigenvalues must be finite and >= 0");
    if (eta(i) > 0) ++nonzero;
    total += eta(i);
  }
  require(nonzero > 0 || lambda > 0, "solve_kappa: all eigenvalues zero and lambda = 0");
  if (ridgeless) *ridgeless = false;
  const double hi = lambda + total;
  if (P == 0) return hi;
  if (lambda == 0 && P >= static_cast<double>(nonzero)) {
    if (ridgeless) *ridgeless = true;
    return 0.0;
  }
  return method == KappaMethod::newton ? solve_newton(eta, P, lambda, hi) : solve_ode(eta, P, lambda, hi);
}

double kappa_residual(const VectorXd& eta, double P, double lambda, double kappa) {
  const double scale = std::max({kappa, lambda, std::numeric_limits<double>::min()});
  return std::abs(g_value(eta, P, lambda, kappa)) / scale;
}

SelfConsistentState compute_state(const VectorXd& eta, const VectorXd& O_diag, double P, double lambda) {
  require(O_diag.size() == eta.size(), "compute_state: overlap diagonal length differs from eigenvalue count");
  SelfConsistentState s;
  s.P = P;
  s.lambda = lambda;
  s.kappa = solve_kappa(eta, P, lambda, &s.ridgeless);
  for (Index i = 0; i < eta.size(); ++i) {
    const double den = P * eta(i) + s.kappa;
    if (den <= 0) continue;
    const double t = P * eta(i) * eta(i) / (den * den);
    s.gamma += t;
    s.gamma_prime += O_diag(i) * t;
  }
  s.diverged = 1.0 - s.gamma < kDivergenceGap;
  return s;
}

SelfConsistentState compute_state(const VectorXd& eta, const OverlapMatrix& O, double P, double lambda) {
  require(O.O.rows() >= eta.size(), "compute_state: overlap smaller than eigenvalue count");
  return compute_state(eta, O.O.diagonal().head(eta.size()), P, lambda);
}

TheoryPrediction predict_from_moments(const VectorXd& eta_in, const MatrixXd& abar_in, const VectorXd& out_pow,
                                      const TestMoments& m, double P, double lambda, const VectorXd& noise) {
  const Index r = eta_in.size();
  const Index C = abar_in.cols();
  require(abar_in.rows() == r, "predict: target projection rows differ from mode count");
  require(m.O_in.rows() == r && m.O_in.cols() == r, "predict: overlap block has wrong shape");
  require(m.cross.rows() == r && m.cross.cols() == C, "predict: cross moment has wrong shape");
  require(m.irreducible.size() == C && out_pow.size() == C && noise.size() == C, "predict: per-output sizes differ");
  for (Index c = 0; c < C; ++c) require(noise(c) >= 0, "predict: noise must be >= 0");

  TheoryPrediction out;
  out.state = compute_state(eta_in, m.O_in.diagonal(), P, lambda);
  const SelfConsistentState& s = out.state;
  VectorXd d(r);
  for (Index i = 0; i < r; ++i) {
    const double den = P * eta_in(i) + s.kappa;
    d(i) = den > 0 ? s.kappa / den : 0.0;
  }
  out.Eg_per_output.resize(C);
  double num_total = 0.0;
  std::vector<double> num(C), S(C), bias(C);
  for (Index c = 0; c < C; ++c) {
    const VectorXd u = d.cwiseProduct(abar_in.col(c));
    S[c] = u.squaredNorm();
    bias[c] = std::max(0.0, u.dot(m.O_in * u) + 2.0 * u.dot(m.cross.col(c)) + m.irreducible(c));
    num[c] = noise(c) + out_pow(c) + S[c];
    num_total += num[c];
    out.bias += bias[c];
    out.irreducible += m.irreducible(c);
  }
  const bool blown = s.diverged && num_total > 0;
  out.diverged = blown;
  if (blown) {
    out.diagnostic = "1 - gamma = " + std::to_string(1.0 - s.gamma) + " below divergence gap at P = " + std::to_string(P);
    out.variance = s.gamma_prime > 0 ? kInf : 0.0;
    out.Eg = out.bias + out.variance;
    out.Eg_matched = kInf;
    out.delta = kNaN;
    for (Index c = 0; c < C; ++c) out.Eg_per_output(c) = bias[c] + (s.gamma_prime > 0 && num[c] > 0 ? kInf : 0.0);
  } else {
    const double gap = s.diverged ? 1.0 : 1.0 - s.gamma;  // numerator is zero when diverged here
    for (Index c = 0; c < C; ++c) {
      const double var = s.gamma_prime / gap * num[c];
      out.variance += var;
      out.Eg_per_output(c) = bias[c] + var;
      out.Eg_matched += s.gamma / gap * num[c] + S[c] + out_pow(c);
    }
    out.Eg = out.bias + out.variance;
    out.delta = out.Eg - out.Eg_matched;
  }
  const double shift = blown ? kNaN : (1.0 - s.gamma_prime) / (s.diverged ? 1.0 : 1.0 - s.gamma);
  out.O_shifted = m.O_in - shift * MatrixXd::Identity(r, r);
  return out;
}

MatrixXd in_abar(const SpectralDecomposition& dec, const TargetProjection& abar) {
  require(abar.abar.rows() == dec.modes(), "target projection does not match decomposition");
  return abar.abar.topRows(dec.rank);
}

VectorXd out_power(const SpectralDecomposition& dec, const TargetProjection& abar) {
  require(abar.abar.rows() == dec.modes(), "target projection does not match decomposition");
  return abar.abar.bottomRows(dec.modes() - dec.rank).colwise().squaredNorm().transpose();
}

TheoryPrediction predict_Eg(const SpectralDecomposition& dec, const TargetProjection& abar, const OverlapMatrix& O,
                            double P, double lambda, double noise) {
  const Index S = dec.modes(), r = dec.rank;
  require(O.O.rows() == S && O.O.cols() == S, "predict_Eg: overlap size differs from mode count");
  if (!O.complete)
    fail(ErrorKind::domain,
         "predict_Eg: overlap undefined for out-of-RKHS modes off the training support; use predict_on_points");
  const MatrixXd a_out = abar.abar.bottomRows(S - r);
  TestMoments m;
  m.O_in = O.O.topLeftCorner(r, r);
  m.cross = O.O.topRightCorner(r, S - r) * a_out;
  m.irreducible = (a_out.transpose() * O.O.bottomRightCorner(S - r, S - r) * a_out).diagonal();
  const Index C = abar.abar.cols();
  TheoryPrediction p =
      predict_from_moments(dec.in_eigenvalues(), in_abar(dec, abar), out_power(dec, abar), m, P, lambda,
                           VectorXd::Constant(C, noise));
  const double shift = p.diverged ? kNaN
                                  : (1.0 - p.state.gamma_prime) / (p.state.diverged ? 1.0 : 1.0 - p.state.gamma);
  p.O_shifted = O.O - shift * MatrixXd::Identity(S, S);
  return p;
}

TestMoments test_moments(const SpectralDecomposition& dec, const TargetProjection& abar, const MatrixXd& Phi_in_rows,
                         const MatrixXd& Y_rows, const VectorXd& weights) {
  const Index r = dec.rank, Q = Phi_in_rows.rows();
  require(Phi_in_rows.cols() == r, "test_moments: eigenfunction rows must cover the in-RKHS modes");
  require(Y_rows.rows() == Q && weights.size() == Q, "test_moments: point counts differ");
  require(Y_rows.cols() == abar.abar.cols(), "test_moments: output counts differ");
  const MatrixXd resid = Y_rows - Phi_in_rows * in_abar(dec, abar);
  TestMoments m;
  m.O_in = Phi_in_rows.transpose() * weights.asDiagonal() * Phi_in_rows;
  m.cross = Phi_in_rows.transpose() * weights.asDiagonal() * resid;
  m.irreducible = (resid.array().square().colwise() * weights.array()).colwise().sum().transpose();
  return m;
}

TheoryPrediction predict_on_points(const SpectralDecomposition& dec, const TargetProjection& abar,
                                   const MatrixXd& Phi_in_rows, const MatrixXd& Y_rows, const VectorXd& weights,
                                   double P, double lambda, double noise) {
  const TestMoments m = test_moments(dec, abar, Phi_in_rows, Y_rows, weights);
  return predict_from_moments(dec.in_eigenvalues(), in_abar(dec, abar), out_power(dec, abar), m, P, lambda,
                              VectorXd::Constant(abar.abar.cols(), noise));
}

TheoryPrediction predict_on_dataset(const SpectralDecomposition& dec, const TargetProjection& abar, const MatrixXd& Y,
                                    const DiscreteMeasure& ptilde, double P, double lambda, double noise) {
  require(ptilde.size() == dec.points() && Y.rows() == dec.points(), "predict_on_dataset: point counts differ");
  return predict_on_points(dec, abar, dec.Phi.leftCols(dec.rank), Y, ptilde.masses, P, lambda, noise);
}

MatrixXd expected_estimator(const SpectralDecomposition& dec, const TargetProjection& abar, double P, double kappa) {
  MatrixXd coef = MatrixXd::Zero(dec.modes(), abar.abar.cols());
  for (Index i = 0; i < dec.rank; ++i) {
    const double pe = P * dec.eigenvalues(i);
    const double den = pe + kappa;
    if (den > 0) coef.row(i) = (pe / den) * abar.abar.row(i);
  }
  return coef;
}

namespace {

template <bool Parallel>
VectorXd density_impl(const SpectralDecomposition& dec, const TargetProjection& abar, double P, double lambda,
                      double noise, const MatrixXd& Phi_in_rows, const MatrixXd& Y_rows) {
  const Index r = dec.rank, Q = Phi_in_rows.rows(), C = abar.abar.cols();
  require(Phi_in_rows.cols() == r, "pointwise_error_density: rows must cover the in-RKHS modes");
  require(Y_rows.rows() == Q && Y_rows.cols() == C, "pointwise_error_density: target rows have wrong shape");
  require(noise >= 0, "pointwise_error_density: noise must be >= 0");
  const VectorXd eta = dec.in_eigenvalues();
  const MatrixXd a_in = in_abar(dec, abar);
  const VectorXd a_out2 = out_power(dec, abar);
  SelfConsistentState s = compute_state(eta, VectorXd::Zero(r), P, lambda);
  VectorXd d(r), w(r);
  for (Index i = 0; i < r; ++i) {
    const double den = P * eta(i) + s.kappa;
    d(i) = den > 0 ? s.kappa / den : 0.0;
    w(i) = den > 0 ? P * eta(i) * eta(i) / (den * den) : 0.0;
  }
  const MatrixXd U = d.asDiagonal() * a_in;
  double num = 0.0;
  for (Index c = 0; c < C; ++c) num += noise + a_out2(c) + U.col(c).squaredNorm();
  const bool blown = s.diverged && num > 0;
  const double scale = blown ? 0.0 : num / (s.diverged ? 1.0 : 1.0 - s.gamma);
  VectorXd out(Q);
#pragma omp parallel for schedule(static) if (Parallel)
  for (Index q = 0; q < Q; ++q) {
    const auto phi = Phi_in_rows.row(q);
    double b = 0.0;
    for (Index c = 0; c < C; ++c) {
      const double resid = Y_rows(q, c) - phi.dot(a_in.col(c));
      const double f = phi.dot(U.col(c)) + resid;
      b += f * f;
    }
    const double v = phi.cwiseAbs2().dot(w);
    out(q) = blown ? (v > 0 ? kInf : b) : b + v * scale;
  }
  return out;
}

}  // namespace

VectorXd pointwise_error_density_at(const SpectralDecomposition& dec, const TargetProjection& abar, double P,
                                    double lambda, double noise, const MatrixXd& Phi_in_rows, const MatrixXd& Y_rows) {
  return density_impl<true>(dec, abar, P, lambda, noise, Phi_in_rows, Y_rows);
}

VectorXd pointwise_error_density_serial(const SpectralDecomposition& dec, const TargetProjection& abar, double P,
                                        double lambda, double noise, const MatrixXd& Phi_in_rows,
                                        const MatrixXd& Y_rows) {
  return density_impl<false>(dec, abar, P, lambda, noise, Phi_in_rows, Y_rows);
}

VectorXd pointwise_error_density(const SpectralDecomposition& dec, const TargetProjection& abar, double P,
                                 double lambda, double noise, const MatrixXd& Phi_rows) {
  require(Phi_rows.cols() == dec.modes(), "pointwise_error_density: rows must cover every mode");
  require(Phi_rows.allFinite(), "pointwise_error_density: eigenfunction rows contain undefined values");
  const MatrixXd Y = Phi_rows * abar.abar;
  return density_impl<true>(dec, abar, P, lambda, noise, Phi_rows.leftCols(dec.rank), Y);
}

std::vector<TheoryPrediction> theory_curve(const VectorXd& eta_in, const MatrixXd& abar_in, const VectorXd& out_pow,
                                           const TestMoments& m, const std::vector<double>& P_grid, double lambda,
                                           const VectorXd& noise) {
  std::vector<TheoryPrediction> out(P_grid.size());
  parallel_for(static_cast<long>(P_grid.size()), [&](long i) {
    out[i] = predict_from_moments(eta_in, abar_in, out_pow, m, P_grid[i], lambda, noise);
  });
  return out;
}

}  // namespace ksl
