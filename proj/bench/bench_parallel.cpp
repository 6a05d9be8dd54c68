// Wall time of each OpenMP kernel against its serial twin.
#include <benchmark/benchmark.h>

#include <random>

#include "ksl/empirical.hpp"
#include "ksl/kernels.hpp"
#include "ksl/optimizer.hpp"
#include "ksl/theory.hpp"

using namespace ksl;

namespace {

MatrixXd random_inputs(Index M, Index D, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  MatrixXd X(M, D);
  for (Index j = 0; j < D; ++j)
    for (Index i = 0; i < M; ++i) X(i, j) = n(gen);
  return X;
}

struct Instance {
  MatrixXd X, K, Y;
  DiscreteMeasure p;
  SpectralDecomposition dec;
  TargetProjection abar;
};

const Instance& instance() {
  static const Instance inst = [] {
    Instance s;
    s.X = random_inputs(400, 8, 1);
    s.K = gram(KernelSpec::ntk_relu(2), s.X);
    s.Y = s.X.col(0).array().sin().matrix();
    s.p = uniform_measure(400);
    s.dec = mercer_decompose(s.K, s.p);
    s.abar = project_target(s.dec, s.Y, s.p);
    return s;
  }();
  return inst;
}

void BM_gram_parallel(benchmark::State& st) {
  const MatrixXd X = random_inputs(st.range(0), 20, 2);
  for (auto _ : st) benchmark::DoNotOptimize(gram(KernelSpec::ntk_relu(3), X));
}

void BM_gram_serial(benchmark::State& st) {
  const MatrixXd X = random_inputs(st.range(0), 20, 2);
  for (auto _ : st) benchmark::DoNotOptimize(gram_serial(KernelSpec::ntk_relu(3), X));
}

ExperimentConfig trial_config() {
  ExperimentConfig c;
  c.P_grid = {50, 100};
  c.trials = 16;
  c.master_seed = 3;
  c.lambda = 1e-3;
  c.noise = 0.01;
  return c;
}

void BM_trials_parallel(benchmark::State& st) {
  const Instance& s = instance();
  const KrrProblem prob = discrete_problem(s.K, s.Y, s.p, s.p);
  for (auto _ : st) benchmark::DoNotOptimize(run_learning_curve(trial_config(), prob));
}

void BM_trials_serial(benchmark::State& st) {
  const Instance& s = instance();
  const KrrProblem prob = discrete_problem(s.K, s.Y, s.p, s.p);
  for (auto _ : st) benchmark::DoNotOptimize(run_learning_curve_serial(trial_config(), prob));
}

Objective loss_objective(const MatrixXd& K, const MatrixXd& Y) {
  return [&K, &Y](const VectorXd& z) { return get_loss(z, K, Y, 1e-2, 20.0, 0.01); };
}

void BM_fd_gradient_parallel(benchmark::State& st) {
  const Instance& s = instance();
  const MatrixXd K = s.K.topLeftCorner(60, 60), Y = s.Y.topRows(60);
  const Objective f = loss_objective(K, Y);
  const VectorXd z = VectorXd::Zero(60);
  for (auto _ : st) benchmark::DoNotOptimize(fd_gradient(f, z, 1e-5, OptimizerConfig::FdScheme::central));
}

void BM_fd_gradient_serial(benchmark::State& st) {
  const Instance& s = instance();
  const MatrixXd K = s.K.topLeftCorner(60, 60), Y = s.Y.topRows(60);
  const Objective f = loss_objective(K, Y);
  const VectorXd z = VectorXd::Zero(60);
  for (auto _ : st) benchmark::DoNotOptimize(fd_gradient_serial(f, z, 1e-5, OptimizerConfig::FdScheme::central));
}

void BM_density_parallel(benchmark::State& st) {
  const Instance& s = instance();
  const MatrixXd Phi = s.dec.Phi.leftCols(s.dec.rank);
  for (auto _ : st)
    benchmark::DoNotOptimize(pointwise_error_density_at(s.dec, s.abar, 50.0, 1e-3, 0.01, Phi, s.Y));
}

void BM_density_serial(benchmark::State& st) {
  const Instance& s = instance();
  const MatrixXd Phi = s.dec.Phi.leftCols(s.dec.rank);
  for (auto _ : st)
    benchmark::DoNotOptimize(pointwise_error_density_serial(s.dec, s.abar, 50.0, 1e-3, 0.01, Phi, s.Y));
}

}  // namespace

BENCHMARK(BM_gram_parallel)->Arg(500)->Arg(1500)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_gram_serial)->Arg(500)->Arg(1500)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_trials_parallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_trials_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_fd_gradient_parallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_fd_gradient_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_density_parallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_density_serial)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
