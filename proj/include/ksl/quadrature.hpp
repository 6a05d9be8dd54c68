#pragma once

#include <functional>

#include "ksl/linalg.hpp"

namespace ksl {

struct GaussRule {
  VectorXd nodes;
  VectorXd weights;
};

// n-point Gauss rule for the weight (1-t)^a (1+t)^b on [-1, 1], from the
// eigenvalues of the Jacobi matrix.
GaussRule gauss_jacobi(int n, double a, double b);

// Gegenbauer polynomial for the sphere in D dimensions, normalized so
// that P_k(1) = 1.
double gegenbauer(int k, Index D, double t);

// Per-mode eigenvalues eta_k, k = 0..kmax, of the dot-product kernel
// K(x, x') = profile(x.x') under the uniform measure on the unit sphere in D
// dimensions.
VectorXd dot_product_spectrum(const std::function<double(double)>& profile, Index D, int kmax, int nodes);

// Degree-k power of a zonal function g(x) = h(x.z), |z| = 1, under the same
// measure: N(D,k) * (mean of h(t) P_k(t))^2.
VectorXd zonal_power(const std::function<double(double)>& h, Index D, int kmax, int nodes);

}  // namespace ksl
