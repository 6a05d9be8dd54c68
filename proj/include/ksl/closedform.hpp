#pragma once

#include "ksl/theory.hpp"

namespace ksl {

// Linear kernel (1/D) x.x' with Gaussian training and test inputs of
// covariance C and Ctilde and target beta.x.
struct LinearGaussianSpec {
  MatrixXd C;
  MatrixXd Ctilde;
  VectorXd beta;
  double noise = 0.0;
  double lambda = 0.0;

  Index D() const { return beta.size(); }
  void validate() const;
};

// Evaluated in the eigenbasis u of C: eigenvalues c/D, eigenfunctions
// u.x / sqrt(c); directions with c = 0 are out of the training support.
TheoryPrediction gaussian_linear_Eg(const LinearGaussianSpec& spec, double P);

// Diagonal covariances: training variance sigma2 on the first M_r
// coordinates, test variance sigma2tilde on the first M_s, kernel built from
// the first M features with 1/M scaling, target on the first N coordinates.
struct DiagonalLinearSpec {
  double sigma2 = 1.0;
  double sigma2tilde = 1.0;
  Index M_r = 0;
  Index M_s = 0;
  Index N = 0;
  Index M = 0;
  Index D = 0;
  VectorXd beta;  // length D, zero beyond N
  double noise = 0.0;
  double lambda = 0.0;
  bool normalized = false;  // require sum_{rho<=N} beta^2 = 1

  void validate() const;
};

struct DiagonalResult {
  double Eg = 0.0;
  double kappa_prime = 0.0;
  double lambda_tilde = 0.0;
  double alpha = 0.0;
  double gamma = 0.0;
  double effective_noise = 0.0;
  double irreducible = 0.0;
  bool diverged = false;
};

// Positive root of k^2 - (1 + lt - a) k - lt a = 0, written to avoid
// cancellation when 1 + lt - a < 0.
double kappa_prime_closed(double alpha, double lambda_tilde);

// M = M_s = D uses the single-rate form; anything else goes through
// general_linear_Eg.
DiagonalResult diagonal_linear_Eg(const DiagonalLinearSpec& spec, double P);
DiagonalResult general_linear_Eg(const DiagonalLinearSpec& spec, double P);

double optimal_ridge(Index M_r, Index D, double noise);

// Number of degree-k spherical harmonics in D dimensions.
double sphere_degeneracy(Index D, Index k);

// Stage-k model for a dot-product kernel on spheres. eta_bar_k is the total
// spectral mass of degree k (degeneracy times per-mode eigenvalue) and a2_k
// the target power at degree k. Training inputs have radius R, test inputs
// radius Rt.
struct SphereNtkSpec {
  VectorXd eta_bar;
  VectorXd a2;
  Index D = 3;
  double R = 1.0;
  double Rt = 1.0;
  double noise = 0.0;
  double lambda = 0.0;
  Index stage = 0;

  void validate() const;
};

struct SphereStageResult {
  double Eg = 0.0;
  double kappa_prime = 0.0;
  double lambda_tilde = 0.0;
  double effective_noise = 0.0;
  double irreducible = 0.0;
  bool diverged = false;
};

SphereStageResult ntk_sphere_Eg(const SphereNtkSpec& spec, double alpha_k);

}  // namespace ksl
