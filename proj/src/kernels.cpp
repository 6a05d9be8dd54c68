#include "ksl/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ksl/error.hpp"

namespace ksl {

KernelSpec KernelSpec::linear(Index dim, Index features) {
  KernelSpec k;
  k.family = Family::linear;
  k.dim = dim;
  k.features = features;
  return k;
}

KernelSpec KernelSpec::rbf(double bandwidth) {
  KernelSpec k;
  k.family = Family::rbf;
  k.bandwidth = bandwidth;
  return k;
}

KernelSpec KernelSpec::laplace(double bandwidth) {
  KernelSpec k;
  k.family = Family::laplace;
  k.bandwidth = bandwidth;
  return k;
}

KernelSpec KernelSpec::fourier(int modes) {
  KernelSpec k;
  k.family = Family::fourier;
  k.modes = modes;
  return k;
}

KernelSpec KernelSpec::ntk_relu(int depth) {
  KernelSpec k;
  k.family = Family::ntk_relu;
  k.depth = depth;
  return k;
}

void KernelSpec::check(Index D) const {
  require(D >= 1, "kernel input dimension must be at least 1");
  switch (family) {
    case Family::linear:
      if (dim != 0) require(dim == D, "linear kernel dimension " + std::to_string(dim) + " does not match input dimension " + std::to_string(D));
      require(features >= 0 && features <= D, "linear kernel feature count must lie in [1, D]");
      break;
    case Family::rbf:
    case Family::laplace:
      require(std::isfinite(bandwidth) && bandwidth > 0, "kernel bandwidth must be positive");
      break;
    case Family::fourier:
      require(D == 1, "fourier_bandlimited kernel accepts 1-D inputs only");
      require(modes >= 1, "fourier_bandlimited kernel needs at least one mode");
      break;
    case Family::ntk_relu:
      require(depth >= 1, "ntk_relu depth must be at least 1");
      break;
  }
}

std::string KernelSpec::name() const {
  switch (family) {
    case Family::linear: return "linear";
    case Family::rbf: return "rbf";
    case Family::laplace: return "laplace";
    case Family::fourier: return "fourier_bandlimited";
    case Family::ntk_relu: return "ntk_relu";
  }
  return "unknown";
}

namespace {

inline double arccos_k0(double t) { return (std::numbers::pi - std::acos(t)) / std::numbers::pi; }

inline double arccos_k1(double t) {
  const double th = std::acos(t);
  return (t * (std::numbers::pi - th) + std::sqrt(std::max(0.0, 1.0 - t * t))) / std::numbers::pi;
}

}  // namespace

double ntk_relu_eval(int depth, double dot, double n1, double n2) {
  require(depth >= 1, "ntk_relu depth must be at least 1");
  require(n1 > 0 && n2 > 0, "ntk_relu: zero-norm input has no angle");
  const double nn = n1 * n2;
  require(std::abs(dot) <= nn * (1 + 1e-12), "ntk_relu: |x.x'| exceeds |x||x'|");
  double sigma = dot;
  double theta = dot;
  for (int h = 1; h < depth; ++h) {
    const double t = std::clamp(sigma / nn, -1.0, 1.0);
    sigma = nn * arccos_k1(t);
    theta = theta * arccos_k0(t) + sigma;
  }
  return theta;
}

double ntk_relu_profile(int depth, double t) { return ntk_relu_eval(depth, std::clamp(t, -1.0, 1.0), 1.0, 1.0); }

double kernel_eval(const KernelSpec& spec, const double* x, const double* y, Index D) {
  switch (spec.family) {
    case KernelSpec::Family::linear: {
      const Index m = spec.features > 0 ? spec.features : D;
      double s = 0.0;
      for (Index k = 0; k < m; ++k) s += x[k] * y[k];
      return s / static_cast<double>(m);
    }
    case KernelSpec::Family::rbf: {
      double s = 0.0;
      for (Index k = 0; k < D; ++k) s += (x[k] - y[k]) * (x[k] - y[k]);
      return std::exp(-s / (2.0 * spec.bandwidth * spec.bandwidth));
    }
    case KernelSpec::Family::laplace: {
      double s = 0.0;
      for (Index k = 0; k < D; ++k) s += (x[k] - y[k]) * (x[k] - y[k]);
      return std::exp(-std::sqrt(s) / spec.bandwidth);
    }
    case KernelSpec::Family::fourier: {
      const double d = std::numbers::pi * (x[0] - y[0]);
      double s = 0.0;
      for (int k = 1; k <= spec.modes; ++k) s += std::cos(k * d);
      return s;
    }
    case KernelSpec::Family::ntk_relu: {
      double dot = 0.0, a = 0.0, b = 0.0;
      for (Index k = 0; k < D; ++k) {
        dot += x[k] * y[k];
        a += x[k] * x[k];
        b += y[k] * y[k];
      }
      // k0 has infinite slope at t = 1, so a rounded cosine of identical
      // inputs would shift the diagonal by ~1e-8 relative
      if (std::equal(x, x + D, y)) return spec.depth * a;
      return ntk_relu_eval(spec.depth, dot, std::sqrt(a), std::sqrt(b));
    }
  }
  return 0.0;
}

namespace {

// Row-major copies so each kernel evaluation reads contiguous memory.
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <bool Parallel>
MatrixXd gram_impl(const KernelSpec& spec, const MatrixXd& X, const MatrixXd* X2) {
  const Index D = X.cols();
  spec.check(D);
  if (X2) require(X2->cols() == D, "gram: column counts differ");
  const RowMat A = X;
  const RowMat B = X2 ? RowMat(*X2) : RowMat();
  const RowMat& R = X2 ? B : A;
  const Index n = A.rows(), m = R.rows();
  MatrixXd K(n, m);
  const bool sym = X2 == nullptr;
  parallel_for(
      static_cast<long>(n),
      [&](long i) {
        const Index j0 = sym ? i : 0;
        for (Index j = j0; j < m; ++j) K(i, j) = kernel_eval(spec, A.row(i).data(), R.row(j).data(), D);
      },
      Parallel);
  if (sym)
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < i; ++j) K(i, j) = K(j, i);
  return K;
}

}  // namespace

MatrixXd gram(const KernelSpec& spec, const MatrixXd& X) { return gram_impl<true>(spec, X, nullptr); }
MatrixXd gram(const KernelSpec& spec, const MatrixXd& X, const MatrixXd& X2) { return gram_impl<true>(spec, X, &X2); }
MatrixXd gram_serial(const KernelSpec& spec, const MatrixXd& X) { return gram_impl<false>(spec, X, nullptr); }
MatrixXd gram_serial(const KernelSpec& spec, const MatrixXd& X, const MatrixXd& X2) {
  return gram_impl<false>(spec, X, &X2);
}

}  // namespace ksl
