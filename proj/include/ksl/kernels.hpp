#pragma once

#include <string>

#include "ksl/linalg.hpp"

namespace ksl {

struct KernelSpec {
  enum class Family { linear, rbf, laplace, fourier, ntk_relu };
  Family family = Family::linear;
  Index dim = 0;           // linear: ambient dimension D (0 = take from input)
  Index features = 0;      // linear: only the first M coordinates enter (0 = all)
  double bandwidth = 1.0;  // rbf, laplace
  int modes = 1;           // fourier: K(x,x') = sum_{k=1}^N cos(k pi (x - x'))
  int depth = 2;           // ntk_relu: number of weight layers

  static KernelSpec linear(Index dim = 0, Index features = 0);
  static KernelSpec rbf(double bandwidth);
  static KernelSpec laplace(double bandwidth);
  static KernelSpec fourier(int modes);
  static KernelSpec ntk_relu(int depth);

  // Throws unless the parameters are usable with inputs of dimension D.
  void check(Index D) const;
  std::string name() const;
};

// Fully connected ReLU NTK, NTK parameterization, no biases, c_sigma = 2.
// depth L counts weight layers, so L = 1 is the linear kernel x.x'.
//   Sigma_0 = x.x',  Theta_0 = Sigma_0
//   Sigma_h = n1 n2 k1(t_h),  Theta_h = Theta_{h-1} k0(t_h) + Sigma_h,
//   t_h = Sigma_{h-1} / (n1 n2),  h = 1..L-1
// with the arc-cosine functions k0, k1. On the diagonal K(x,x) = L |x|^2.
double ntk_relu_eval(int depth, double dot, double n1, double n2);

// Angular profile k(t) = K(x,x') / (|x||x'|) of the ReLU NTK.
double ntk_relu_profile(int depth, double t);

double kernel_eval(const KernelSpec& spec, const double* x, const double* y, Index D);

// Gram matrix K(X_i, X_j). Row blocks are filled in parallel; every entry is
// computed independently so the result matches gram_serial bit for bit.
MatrixXd gram(const KernelSpec& spec, const MatrixXd& X);
MatrixXd gram(const KernelSpec& spec, const MatrixXd& X, const MatrixXd& X2);
MatrixXd gram_serial(const KernelSpec& spec, const MatrixXd& X);
MatrixXd gram_serial(const KernelSpec& spec, const MatrixXd& X, const MatrixXd& X2);

}  // namespace ksl
