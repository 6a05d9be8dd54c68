#include "ksl/quadrature.hpp"

#include <cmath>

#include "ksl/closedform.hpp"
#include "ksl/error.hpp"

namespace ksl {

GaussRule gauss_jacobi(int n, double a, double b) {
  require(n >= 1, "gauss_jacobi: need at least one node");
  require(a > -1 && b > -1, "gauss_jacobi: exponents must exceed -1");
  MatrixXd J = MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    const double s = 2.0 * i + a + b;
    J(i, i) = (s == 0.0 || s + 2.0 == 0.0) ? (b - a) / (a + b + 2.0) : (b * b - a * a) / (s * (s + 2.0));
    if (i + 1 < n) {
      const double k = i + 1.0;
      const double t = 2.0 * k + a + b;
      double v;
      if (k == 1.0)
        v = 4.0 * (1.0 + a) * (1.0 + b) / ((2.0 + a + b) * (2.0 + a + b) * (3.0 + a + b));
      else
        v = 4.0 * k * (k + a) * (k + b) * (k + a + b) / (t * t * (t + 1.0) * (t - 1.0));
      J(i, i + 1) = J(i + 1, i) = std::sqrt(v);
    }
  }
  if (n == 1) J(0, 0) = (b - a) / (a + b + 2.0);
  const double mu0 = std::exp((a + b + 1.0) * std::log(2.0) + std::lgamma(a + 1.0) + std::lgamma(b + 1.0) -
                              std::lgamma(a + b + 2.0));
  SymmetricEigen eig = symmetric_eigen(J);
  GaussRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    // ascending nodes
    const int src = n - 1 - i;
    rule.nodes(i) = eig.values(src);
    rule.weights(i) = mu0 * eig.vectors(0, src) * eig.vectors(0, src);
  }
  return rule;
}

double gegenbauer(int k, Index D, double t) {
  require(k >= 0 && D >= 2, "gegenbauer: need k >= 0 and D >= 2");
  if (k == 0) return 1.0;
  double p0 = 1.0, p1 = t;
  const double d = static_cast<double>(D);
  for (int j = 2; j <= k; ++j) {
    const double p2 = ((2.0 * j + d - 4.0) * t * p1 - (j - 1.0) * p0) / (j + d - 3.0);
    p0 = p1;
    p1 = p2;
  }
  return p1;
}

namespace {

// Weighted mean of f(t) P_k(t) against the sphere marginal of t = x.z.
VectorXd projections(const std::function<double(double)>& f, Index D, int kmax, int nodes) {
  require(D >= 2, "sphere dimension must be at least 2");
  require(kmax >= 0, "kmax must be >= 0");
  const double a = (static_cast<double>(D) - 3.0) / 2.0;
  const GaussRule rule = gauss_jacobi(nodes, a, a);
  const double total = rule.weights.sum();
  VectorXd out = VectorXd::Zero(kmax + 1);
  for (int i = 0; i < nodes; ++i) {
    const double t = rule.nodes(i);
    const double ft = f(t) * rule.weights(i) / total;
    for (int k = 0; k <= kmax; ++k) out(k) += ft * gegenbauer(k, D, t);
  }
  return out;
}

}  // namespace

VectorXd dot_product_spectrum(const std::function<double(double)>& profile, Index D, int kmax, int nodes) {
  // Funk-Hecke: eta_k is the mean of profile(t) P_k(t) over the marginal of t
  return projections(profile, D, kmax, nodes);
}

VectorXd zonal_power(const std::function<double(double)>& h, Index D, int kmax, int nodes) {
  VectorXd p = projections(h, D, kmax, nodes);
  for (int k = 0; k <= kmax; ++k) p(k) = sphere_degeneracy(D, k) * p(k) * p(k);
  return p;
}

}  // namespace ksl
