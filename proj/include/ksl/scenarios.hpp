#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ksl/closedform.hpp"
#include "ksl/empirical.hpp"
#include "ksl/optimizer.hpp"
#include "ksl/schema.hpp"

namespace ksl {

// Named text artifacts a scenario produces, in write order.
struct Artifacts {
  std::vector<std::pair<std::string, std::string>> files;
  void add(std::string name, std::string contents) { files.emplace_back(std::move(name), std::move(contents)); }
};

// Target weights: the first `strong` entries N(0,1), the next `weak` entries
// N(0, weak_variance), zeros after that; optionally scaled to unit norm.
VectorXd draw_beta(Index D, Index strong, Index weak, double weak_variance, bool normalize, std::uint64_t seed);

// Theory-module column contract.
std::vector<std::string> theory_columns();
MatrixXd theory_rows(const std::vector<double>& P, const std::vector<TheoryPrediction>& preds);
std::vector<std::string> empirical_columns();
MatrixXd empirical_rows(const EmpiricalCurve& curve);
Json compare_json(const CompareReport& rep);

// Linear kernel on Gaussian data whose training covariance keeps only the
// first M_r coordinates; test covariance is the identity.
struct Fig3aParams {
  Index D = 120;
  std::vector<Index> M_r_list{30, 40, 60, 120};
  Index strong_modes = 40;
  Index weak_modes = 20;
  double weak_variance = 0.01;
  bool normalize_beta = true;
  std::uint64_t beta_seed = 7;
  double lambda = 1e-3;
  double noise = 0.0;
  std::vector<Index> P_grid;
  int trials = 30;
};

struct Fig3aCurve {
  Index M_r = 0;
  std::vector<double> P;
  std::vector<TheoryPrediction> theory;
  std::vector<double> closed_form;  // single-rate formula, same quantity
  EmpiricalCurve empirical;
  CompareReport compare;
};

struct Fig3aResult {
  VectorXd beta;
  std::vector<Fig3aCurve> curves;
  Artifacts artifacts;
};

Fig3aResult run_fig3a(const Fig3aParams& params, std::uint64_t seed);

// Ridge sweep on the diagonal model with label noise.
struct Fig3bParams {
  Index D = 120;
  std::vector<Index> M_r_list{40, 120};
  Index N = 40;
  bool normalize_beta = true;
  std::uint64_t beta_seed = 11;
  double noise = 0.1;
  std::vector<double> lambda_list{0.0, 1e-4, 1e-2, 1.0};
  bool include_optimal_lambda = true;
  std::vector<Index> P_grid;
  int trials = 30;  // empirical overlays for lambda > 0; 0 skips them
};

struct Fig3bCurve {
  Index M_r = 0;
  double lambda = 0.0;
  bool optimal = false;
  std::vector<double> P;
  std::vector<DiagonalResult> theory;
  EmpiricalCurve empirical;  // empty when skipped
};

struct Fig3bResult {
  VectorXd beta;
  std::vector<Fig3bCurve> curves;
  Artifacts artifacts;
};

Fig3bResult run_fig3b(const Fig3bParams& params, std::uint64_t seed);

// General linear model: closed form against the discrete pipeline on a
// moment-matched sample of the Gaussian training and test measures.
struct LinearCase {
  std::string name;
  Index M = 1;
  Index M_r = 1;
  Index M_s = 0;
  Index N = 0;
  double noise = 0.0;
};

struct FigSI3Params {
  Index D = 60;
  std::vector<LinearCase> cases;
  double sigma2 = 1.0;
  double sigma2tilde = 1.0;
  double lambda = 1e-3;
  std::vector<Index> P_grid;
  Index points = 3000;
  bool moment_match = true;
  std::uint64_t beta_seed = 3;
};

struct FigSI3Curve {
  LinearCase spec;
  std::vector<double> P;
  std::vector<DiagonalResult> closed_form;
  std::vector<TheoryPrediction> pipeline;
  double max_relative_gap = 0.0;
  Index rank = 0;
};

struct FigSI3Result {
  VectorXd beta;
  std::vector<FigSI3Curve> curves;
  Artifacts artifacts;
};

FigSI3Result run_figSI3(const FigSI3Params& params, std::uint64_t seed);

// ReLU NTK on the unit sphere; test inputs are a fixed sample of directions
// scaled to each radius. Target: sum of kernel bumps at random unit centers.
// Theory uses a pool of `points` sphere samples as the training measure.
struct FigSI4Params {
  Index D = 15;
  int depth = 2;
  Index points = 2000;
  Index test_points = 10000;
  std::vector<double> radii{1.0, 0.5};
  Index centers = 6;
  double lambda = 1e-3;
  double noise = 0.0;
  std::vector<Index> P_grid;
  int trials = 30;
  int spectrum_degree = 6;
};

struct FigSI4Curve {
  double radius = 1.0;
  std::vector<double> P;
  std::vector<TheoryPrediction> theory;
  EmpiricalCurve empirical;
  CompareReport compare;
};

struct FigSI4Result {
  Index rank = 0;
  VectorXd spectrum;  // per-mode eigenvalues by degree
  std::vector<FigSI4Curve> curves;
  Artifacts artifacts;
};

FigSI4Result run_figSI4(const FigSI4Params& params, std::uint64_t seed);

// Band-limited Fourier kernel on [-1, 1]: training on a rectangular grid of
// half-width a versus Gaussian samples of the same variance, tested on a
// uniform grid of the wider interval.
struct FigSI5Params {
  int modes = 8;
  double train_halfwidth = 0.3;
  double test_halfwidth = 1.0;
  Index points = 800;
  Index test_points = 400;
  double theta = 0.6;
  double lambda = 1e-6;
  double noise = 0.0;
  std::vector<Index> P_grid;
};

struct FigSI5Curve {
  std::string name;  // "rectangular" or "gaussian"
  VectorXd eigenvalues;
  Index rank = 0;
  Index collapsed = 0;  // modes below the rank threshold
  double irreducible = 0.0;
  std::vector<double> P;
  std::vector<TheoryPrediction> theory;
};

struct FigSI5Result {
  std::vector<FigSI5Curve> curves;
  Artifacts artifacts;
};

// Degree-<=N part of exp(cos(pi x - theta)) + exp(cos(pi x + theta)) with the
// constant removed.
double fourier_target(double x, int modes, double theta);
FigSI5Result run_figSI5(const FigSI5Params& params, std::uint64_t seed);

// Two Gaussian clusters in D dimensions with labels +-1 whose first
// coordinate is shifted by +-separation, and the ReLU NTK. The training
// measure is optimized at P_budget against the uniform test measure.
struct TwoClusterParams {
  Index points = 200;
  Index D = 10;
  double separation = 1.0;
  int depth = 2;
  double lambda = 1e-2;
  double noise = 0.02;
  Index P_budget = 30;
  double learning_rate = 200.0;
  int steps = 80;
  double fd_step = 1e-5;
  int trials = 30;
};

struct TwoClusterData {
  MatrixXd X;
  MatrixXd Y;
  MatrixXd K;
};

TwoClusterData two_cluster_data(const TwoClusterParams& params, std::uint64_t seed);

struct TwoClusterResult {
  double Eg_uniform = 0.0;
  double Eg_optimized = 0.0;
  double participation = 0.0;
  OptimizationTrace trace;
  EmpiricalCurve empirical_uniform;
  EmpiricalCurve empirical_optimized;
  Artifacts artifacts;
};

TwoClusterResult run_two_cluster(const TwoClusterParams& params, std::uint64_t seed);

// Scenario parameters from a materialized "scenario" block.
Fig3aParams fig3a_params(const Json& j);
Fig3bParams fig3b_params(const Json& j);
FigSI3Params figSI3_params(const Json& j);
FigSI4Params figSI4_params(const Json& j);
FigSI5Params figSI5_params(const Json& j);
TwoClusterParams two_cluster_params(const Json& j);

// Bundled reproduce config text by figure id; empty when unknown.
std::string bundled_config(const std::string& figure);
std::vector<std::string> bundled_figures();

// Runs the scenario named by j["figure"] and returns its artifacts plus a
// JSON summary.
Artifacts run_scenario(const Json& j, std::uint64_t seed, Json* summary = nullptr);

}  // namespace ksl
