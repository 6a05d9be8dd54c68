#include <doctest.h>

#include <cmath>
#include <numbers>

#include "ksl/closedform.hpp"
#include "ksl/empirical.hpp"
#include "ksl/kernels.hpp"
#include "ksl/theory.hpp"
#include "test_support.hpp"

using namespace ksl;
using ksl::test::error_kind_of;

namespace {

const double golden = (1.0 + std::sqrt(5.0)) / 2.0;

VectorXd random_spectrum(Index M, std::mt19937_64& gen) {
  std::uniform_real_distribution<double> u(-6.0, 0.0);
  VectorXd eta(M);
  for (Index i = 0; i < M; ++i) eta(i) = std::pow(10.0, u(gen));
  return eta;
}

// Problem on random points with a Gram from the given kernel and a target
// drawn from the kernel's span plus a smooth out-of-span part.
struct Instance {
  MatrixXd X, K, Y;
  DiscreteMeasure p;
  SpectralDecomposition dec;
  TargetProjection abar;
};

Instance make_instance(Index M, Index D, const KernelSpec& k, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  Instance in;
  in.X = ksl::test::random_matrix(M, D, gen);
  in.K = gram(k, in.X);
  in.Y = ksl::test::random_matrix(M, 1, gen);
  in.p = from_weights(ksl::test::random_simplex(M, gen));
  in.dec = mercer_decompose(in.K, in.p);
  in.abar = project_target(in.dec, in.Y, in.p);
  return in;
}

}  // namespace

TEST_CASE("kappa at zero data is lambda plus the trace") {
  std::mt19937_64 gen(1);
  const VectorXd eta = random_spectrum(40, gen);
  CHECK(solve_kappa(eta, 0.0, 0.3) == doctest::Approx(0.3 + eta.sum()).epsilon(1e-15));
}

TEST_CASE("single mode kappa is the golden ratio") {
  const VectorXd eta = VectorXd::Ones(1);
  CHECK(std::abs(solve_kappa(eta, 1.0, 1.0) - golden) < 1e-12);
  CHECK(std::abs(solve_kappa(eta, 1.0, 1.0, nullptr, KappaMethod::ode) - golden) < 1e-9);
}

TEST_CASE("equal modes reproduce the closed-form effective regularization") {
  const Index Mr = 40, D = 120;
  const double sigma2 = 1.5;
  const double eta0 = sigma2 / D;
  const VectorXd eta = VectorXd::Constant(Mr, eta0);
  for (double lambda : {1e-3, 0.05, 1.0})
    for (double P : {1.0, 10.0, 39.0, 40.0, 41.0, 200.0}) {
      const double scale = sigma2 * Mr / D;
      const double kp = kappa_prime_closed(P / Mr, lambda / scale);
      // independent quadratic root of k^2 - (1 + lt - a) k - lt a
      const double lt = lambda / scale, a = P / Mr;
      const double root = 0.5 * ((1 + lt - a) + std::sqrt((1 + lt + a) * (1 + lt + a) - 4 * a));
      CHECK(std::abs(solve_kappa(eta, P, lambda) / scale - root) < 1e-10);
      CHECK(std::abs(kp - root) < 1e-10);
    }
}

TEST_CASE("kappa rejects bad inputs and flags the ridgeless limit") {
  VectorXd eta(3);
  eta << 1.0, 0.5, 0.0;
  CHECK(error_kind_of([&] { solve_kappa(eta, -1.0, 0.1); }) == ErrorKind::domain);
  CHECK(error_kind_of([&] { solve_kappa(eta, 1.0, -0.1); }) == ErrorKind::domain);
  VectorXd bad = eta;
  bad(1) = -1.0;
  CHECK(error_kind_of([&] { solve_kappa(bad, 1.0, 0.1); }) == ErrorKind::domain);
  bool ridgeless = false;
  CHECK(solve_kappa(eta, 2.0, 0.0, &ridgeless) == 0.0);
  CHECK(ridgeless);
  CHECK(solve_kappa(eta, 1.0, 0.0, &ridgeless) > 0.0);
  CHECK_FALSE(ridgeless);
}

TEST_CASE("kappa solves its equation on random spectra") {
  std::mt19937_64 gen(7);
  for (int rep = 0; rep < 20; ++rep) {
    const Index M = 1 + static_cast<Index>(gen() % 500);
    const VectorXd eta = random_spectrum(M, gen);
    for (double P : {0.0, 1.0, 17.0, 1e3, 1e6})
      for (double lambda : {0.0, 1e-8, 1e-3, 1.0}) {
        bool ridgeless = false;
        const double k = solve_kappa(eta, P, lambda, &ridgeless);
        if (ridgeless) continue;
        CHECK(kappa_residual(eta, P, lambda, k) < 1e-12);
      }
  }
}

TEST_CASE("kappa decreases in P and increases in lambda") {
  std::mt19937_64 gen(9);
  const VectorXd eta = random_spectrum(100, gen);
  double prev = solve_kappa(eta, 0.0, 1e-2);
  for (double P = 1.0; P <= 1e5; P *= 1.7) {
    const double k = solve_kappa(eta, P, 1e-2);
    CHECK(k < prev);
    prev = k;
  }
  prev = solve_kappa(eta, 50.0, 0.0);
  for (double lambda = 1e-6; lambda < 10.0; lambda *= 3.0) {
    const double k = solve_kappa(eta, 50.0, lambda);
    CHECK(k > prev);
    prev = k;
  }
}

TEST_CASE("ode integration agrees with newton") {
  std::mt19937_64 gen(12);
  const VectorXd eta = random_spectrum(60, gen);
  for (double P : {3.0, 30.0, 300.0}) {
    const double a = solve_kappa(eta, P, 1e-3);
    const double b = solve_kappa(eta, P, 1e-3, nullptr, KappaMethod::ode);
    CHECK(ksl::test::rel_diff(a, b) < 1e-8);
  }
}

TEST_CASE("state at zero data and under a matched test measure") {
  std::mt19937_64 gen(3);
  const VectorXd eta = random_spectrum(30, gen);
  const SelfConsistentState s0 = compute_state(eta, VectorXd::Ones(30), 0.0, 0.1);
  CHECK(s0.gamma == 0.0);
  CHECK(s0.gamma_prime == 0.0);
  const SelfConsistentState s = compute_state(eta, VectorXd::Ones(30), 25.0, 0.1);
  CHECK(s.gamma_prime == s.gamma);
  CHECK(s.gamma > 0.0);
  CHECK(s.gamma < 1.0);
}

TEST_CASE("ridgeless equal modes diverge at alpha one") {
  const VectorXd eta = VectorXd::Constant(20, 0.05);
  const SelfConsistentState s = compute_state(eta, VectorXd::Ones(20), 20.0, 0.0);
  CHECK(s.diverged);
  CHECK(1.0 - s.gamma < kDivergenceGap);
  const SelfConsistentState near = compute_state(eta, VectorXd::Ones(20), 20.0, 1e-14);
  CHECK(1.0 - near.gamma < 1e-6);
  CHECK_FALSE(compute_state(eta, VectorXd::Ones(20), 10.0, 0.0).diverged);
}

TEST_CASE("matched test measure gives the matched error") {
  const Instance in = make_instance(25, 3, KernelSpec::rbf(1.0), 5);
  const OverlapMatrix O = overlap(in.dec, in.p);
  for (double P : {1.0, 5.0, 40.0}) {
    const TheoryPrediction t = predict_Eg(in.dec, in.abar, O, P, 1e-3, 0.1);
    CHECK(std::abs(t.Eg - t.Eg_matched) < 1e-10 * std::max(1.0, t.Eg));
    CHECK(std::abs(t.delta) < 1e-10);
    CHECK(std::abs(t.Eg - (t.bias + t.variance)) < 1e-12 * std::max(1.0, t.Eg));
  }
}

TEST_CASE("zero data error is the test power of the target") {
  const Instance in = make_instance(20, 2, KernelSpec::laplace(1.0), 6);
  std::mt19937_64 gen(60);
  const DiscreteMeasure pt = from_weights(ksl::test::random_simplex(20, gen));
  const OverlapMatrix O = overlap(in.dec, pt);
  const TheoryPrediction t = predict_Eg(in.dec, in.abar, O, 0.0, 0.1, 0.5);
  const double power = (pt.masses.array() * in.Y.col(0).array().square()).sum();
  const double quad = (in.abar.abar.transpose() * O.O * in.abar.abar)(0, 0);
  CHECK(std::abs(t.Eg - power) < 1e-10);
  CHECK(std::abs(t.Eg - quad) < 1e-10);
  CHECK(t.variance == 0.0);
}

TEST_CASE("theory matches brute-force dataset averaging for a linear kernel") {
  // 30 points, linear kernel, ridge large enough that finite-P corrections
  // to the average sit below the Monte Carlo resolution
  const Index M = 30, D = 30, trials = 2000;
  const double lambda = 100.0, noise = 0.5;
  std::mt19937_64 gen(2024);
  const MatrixXd X = ksl::test::random_matrix(M, D, gen);
  const VectorXd beta = ksl::test::random_matrix(D, 1, gen);
  const MatrixXd Y = X * beta;
  const MatrixXd K = gram(KernelSpec::linear(), X);
  const DiscreteMeasure p = uniform_measure(M);
  const SpectralDecomposition dec = mercer_decompose(K, p);
  const TargetProjection abar = project_target(dec, Y, p);
  const OverlapMatrix O = overlap(dec, p);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_int_distribution<Index> pick(0, M - 1);
  for (Index P : {2, 5, 10, 20}) {
    const double theory = predict_Eg(dec, abar, O, static_cast<double>(P), lambda, noise).Eg;
    double sum = 0.0, sum2 = 0.0;
    for (Index t = 0; t < trials; ++t) {
      std::vector<Index> rows(P);
      VectorXd y(P);
      for (Index i = 0; i < P; ++i) {
        rows[i] = pick(gen);
        y(i) = Y(rows[i], 0) + std::sqrt(noise) * n(gen);
      }
      MatrixXd Kpp(P, P), Kmp(M, P);
      for (Index i = 0; i < P; ++i) {
        Kmp.col(i) = K.col(rows[i]);
        for (Index j = 0; j < P; ++j) Kpp(i, j) = K(rows[i], rows[j]);
      }
      Kpp.diagonal().array() += lambda;
      const VectorXd f = Kmp * Kpp.ldlt().solve(y);
      const double e = (f - Y.col(0)).squaredNorm() / M;
      sum += e;
      sum2 += e * e;
    }
    const double mean = sum / trials;
    const double se = std::sqrt((sum2 / trials - mean * mean) / (trials - 1));
    INFO("P = " << P << " theory " << theory << " mc " << mean << " se " << se);
    CHECK(std::abs(theory - mean) < 2.0 * se);
  }
}

TEST_CASE("expected estimator coefficients") {
  const Instance in = make_instance(15, 2, KernelSpec::rbf(0.7), 8);
  const double k0 = solve_kappa(in.dec.in_eigenvalues(), 0.0, 0.1);
  CHECK(expected_estimator(in.dec, in.abar, 0.0, k0).cwiseAbs().maxCoeff() == 0.0);
  const double big = 1e8;
  const double kb = solve_kappa(in.dec.in_eigenvalues(), big, 1e-6);
  const MatrixXd c = expected_estimator(in.dec, in.abar, big, kb);
  for (Index r = 0; r < in.dec.rank; ++r)
    if (in.dec.eigenvalues(r) > 1e-6) CHECK(std::abs(c(r, 0) - in.abar.abar(r, 0)) < 1e-4);

  SpectralDecomposition one;
  one.eigenvalues = VectorXd::Ones(1);
  one.Phi = MatrixXd::Ones(1, 1);
  one.masses = VectorXd::Ones(1);
  one.support = {0};
  one.rank = 1;
  TargetProjection a;
  a.abar = MatrixXd::Constant(1, 1, 0.8);
  const double k = solve_kappa(one.eigenvalues, 1.0, 1.0);
  CHECK(std::abs(expected_estimator(one, a, 1.0, k)(0, 0) - 0.8 / (1.0 + golden)) < 1e-12);
}

TEST_CASE("pointwise density reproduces the error of every test measure") {
  const Instance in = make_instance(10, 2, KernelSpec::rbf(1.2), 10);
  const double P = 6.0, lambda = 1e-2, noise = 0.05;
  const VectorXd c = pointwise_error_density(in.dec, in.abar, P, lambda, noise, in.dec.Phi);
  CHECK(c.minCoeff() >= 0.0);
  for (Index mu = 0; mu < 10; ++mu) {
    const DiscreteMeasure d = dirac_measure(10, mu);
    const TheoryPrediction t = predict_Eg(in.dec, in.abar, overlap(in.dec, d), P, lambda, noise);
    CHECK(std::abs(t.Eg - c(mu)) < 1e-10 * std::max(1.0, c(mu)));
  }
  const TheoryPrediction u = predict_Eg(in.dec, in.abar, overlap(in.dec, uniform_measure(10)), P, lambda, noise);
  CHECK(std::abs(u.Eg - c.mean()) < 1e-10);
  std::mt19937_64 gen(100);
  const DiscreteMeasure r = from_weights(ksl::test::random_simplex(10, gen));
  const TheoryPrediction t = predict_Eg(in.dec, in.abar, overlap(in.dec, r), P, lambda, noise);
  CHECK(std::abs(t.Eg - r.masses.dot(c)) < 1e-10);
  Index best = 0;
  c.minCoeff(&best);
  CHECK(predict_Eg(in.dec, in.abar, overlap(in.dec, dirac_measure(10, best)), P, lambda, noise).Eg <= t.Eg);
}

TEST_CASE("pointwise density matches its serial twin") {
  const Instance in = make_instance(60, 3, KernelSpec::ntk_relu(2), 11);
  const MatrixXd Phi_in = in.dec.Phi.leftCols(in.dec.rank);
  const VectorXd a = pointwise_error_density_at(in.dec, in.abar, 20.0, 1e-3, 0.1, Phi_in, in.Y);
  const VectorXd b = pointwise_error_density_serial(in.dec, in.abar, 20.0, 1e-3, 0.1, Phi_in, in.Y);
  CHECK(a == b);
  const VectorXd c = pointwise_error_density(in.dec, in.abar, 20.0, 1e-3, 0.1, in.dec.Phi);
  CHECK((a - c).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("bias is nonincreasing in P and variance is nonnegative") {
  const Instance in = make_instance(40, 3, KernelSpec::laplace(1.0), 13);
  std::mt19937_64 gen(130);
  const OverlapMatrix O = overlap(in.dec, from_weights(ksl::test::random_simplex(40, gen)));
  double prev = std::numeric_limits<double>::infinity();
  for (double P = 0.0; P <= 2000.0; P = P < 1 ? 1 : P * 1.5) {
    const TheoryPrediction t = predict_Eg(in.dec, in.abar, O, P, 1e-4, 0.2);
    REQUIRE_FALSE(t.diverged);
    CHECK(t.bias <= prev + 1e-12);
    CHECK(t.variance >= 0.0);
    CHECK(std::abs(t.Eg - (t.bias + t.variance)) < 1e-12 * std::max(1.0, t.Eg));
    prev = t.bias;
  }
}

TEST_CASE("ridgeless full-rank fit leaves only the irreducible error") {
  const Instance in = make_instance(12, 4, KernelSpec::rbf(1.0), 14);
  REQUIRE(in.dec.rank == 12);
  std::mt19937_64 gen(140);
  const OverlapMatrix O = overlap(in.dec, from_weights(ksl::test::random_simplex(12, gen)));
  for (double P : {12.0, 30.0}) {
    const TheoryPrediction t = predict_Eg(in.dec, in.abar, O, P, 0.0, 0.0);
    CHECK(std::abs(t.Eg - t.irreducible) < 1e-8);
  }
}

TEST_CASE("diverged state reports infinity with a diagnostic") {
  SpectralDecomposition dec;
  dec.eigenvalues = VectorXd::Constant(4, 0.25);
  dec.Phi = 2.0 * MatrixXd::Identity(4, 4);
  dec.masses = VectorXd::Constant(4, 0.25);
  dec.support = {0, 1, 2, 3};
  dec.rank = 4;
  TargetProjection a;
  a.abar = MatrixXd::Ones(4, 1);
  const TheoryPrediction t = predict_Eg(dec, a, overlap(dec, uniform_measure(4)), 4.0, 0.0, 0.1);
  CHECK(t.diverged);
  CHECK(std::isinf(t.Eg));
  CHECK_FALSE(t.diagnostic.empty());
}

TEST_CASE("error does not depend on the basis inside a degenerate block") {
  // a 4-cycle has a doubly degenerate eigenvalue under the uniform measure
  MatrixXd K(4, 4);
  K << 2, 1, 0, 1, 1, 2, 1, 0, 0, 1, 2, 1, 1, 0, 1, 2;
  const DiscreteMeasure p = uniform_measure(4);
  const SpectralDecomposition dec = mercer_decompose(K, p);
  MatrixXd Y(4, 1);
  Y << 0.3, -1.0, 0.7, 0.2;
  VectorXd w(4);
  w << 0.1, 0.4, 0.3, 0.2;
  const DiscreteMeasure pt = from_weights(w);
  const TargetProjection abar = project_target(dec, Y, p);
  const TheoryPrediction base = predict_Eg(dec, abar, overlap(dec, pt), 3.0, 0.01, 0.1);

  // locate the degenerate pair and rotate it
  Index i0 = -1;
  for (Index r = 0; r + 1 < dec.modes(); ++r)
    if (std::abs(dec.eigenvalues(r) - dec.eigenvalues(r + 1)) < 1e-12) i0 = r;
  REQUIRE(i0 >= 0);
  SpectralDecomposition rot = dec;
  const double th = 0.7;
  rot.Phi.col(i0) = std::cos(th) * dec.Phi.col(i0) + std::sin(th) * dec.Phi.col(i0 + 1);
  rot.Phi.col(i0 + 1) = -std::sin(th) * dec.Phi.col(i0) + std::cos(th) * dec.Phi.col(i0 + 1);
  const TargetProjection abar_rot = project_target(rot, Y, p);
  const TheoryPrediction turned = predict_Eg(rot, abar_rot, overlap(rot, pt), 3.0, 0.01, 0.1);
  CHECK(std::abs(base.Eg - turned.Eg) < 1e-9);
}

TEST_CASE("test points off the training set use extended eigenfunctions") {
  const Instance in = make_instance(30, 2, KernelSpec::rbf(1.0), 15);
  std::mt19937_64 gen(150);
  const MatrixXd T = ksl::test::random_matrix(8, 2, gen);
  const MatrixXd Kc = gram(KernelSpec::rbf(1.0), T, in.X);
  const MatrixXd Phi_t = nystrom_extend(in.dec, Kc);
  const MatrixXd Yt = ksl::test::random_matrix(8, 1, gen);
  const VectorXd wt = VectorXd::Constant(8, 1.0 / 8.0);
  const TheoryPrediction t0 = predict_on_points(in.dec, in.abar, Phi_t, Yt, wt, 0.0, 0.1, 0.0);
  CHECK(std::abs(t0.Eg - Yt.squaredNorm() / 8.0) < 1e-10);
  const TheoryPrediction t = predict_on_points(in.dec, in.abar, Phi_t, Yt, wt, 50.0, 1e-3, 0.0);
  const VectorXd c = pointwise_error_density_at(in.dec, in.abar, 50.0, 1e-3, 0.0, Phi_t, Yt);
  CHECK(std::abs(t.Eg - c.mean()) < 1e-10);
}
