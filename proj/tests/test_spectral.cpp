#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "ksl/kernels.hpp"
#include "ksl/spectral.hpp"
#include "test_support.hpp"

using namespace ksl;
using ksl::test::error_kind_of;

namespace {

double orthonormality_error(const SpectralDecomposition& dec) {
  const Index r = dec.rank;
  MatrixXd Phi(dec.support.size(), r);
  VectorXd w(dec.support.size());
  for (std::size_t a = 0; a < dec.support.size(); ++a) {
    Phi.row(a) = dec.Phi.row(dec.support[a]).head(r);
    w(a) = dec.masses(dec.support[a]);
  }
  return (Phi.transpose() * w.asDiagonal() * Phi - MatrixXd::Identity(r, r)).cwiseAbs().maxCoeff();
}

double eigen_residual(const MatrixXd& K, const SpectralDecomposition& dec) {
  const MatrixXd lhs = K * dec.masses.asDiagonal() * dec.Phi;
  const MatrixXd rhs = dec.Phi * dec.eigenvalues.asDiagonal();
  return (lhs - rhs).cwiseAbs().maxCoeff() / K.norm();
}

}  // namespace

TEST_CASE("identity kernel under the uniform measure") {
  const SpectralDecomposition dec = mercer_decompose(MatrixXd::Identity(2, 2), uniform_measure(2));
  CHECK(std::abs(dec.eigenvalues(0) - 0.5) < 1e-15);
  CHECK(std::abs(dec.eigenvalues(1) - 0.5) < 1e-15);
  CHECK(dec.rank == 2);
  CHECK(orthonormality_error(dec) < 1e-14);
  CHECK((dec.Phi.cwiseAbs().rowwise().sum().array() > 0).all());
}

TEST_CASE("two by two analytic eigenproblem") {
  MatrixXd K(2, 2);
  K << 2, 1, 1, 2;
  const SpectralDecomposition dec = mercer_decompose(K, uniform_measure(2));
  CHECK(std::abs(dec.eigenvalues(0) - 1.5) < 1e-14);
  CHECK(std::abs(dec.eigenvalues(1) - 0.5) < 1e-14);
  CHECK(std::abs(dec.Phi(0, 0) - 1.0) < 1e-14);
  CHECK(std::abs(dec.Phi(1, 0) - 1.0) < 1e-14);
  CHECK(std::abs(std::abs(dec.Phi(0, 1)) - 1.0) < 1e-14);
  CHECK(std::abs(dec.Phi(0, 1) + dec.Phi(1, 1)) < 1e-14);
}

TEST_CASE("mercer reconstruction of a random psd matrix") {
  std::mt19937_64 gen(9);
  const MatrixXd K = ksl::test::random_psd(20, gen);
  const SpectralDecomposition dec = mercer_decompose(K, uniform_measure(20));
  const MatrixXd R = dec.Phi * dec.eigenvalues.asDiagonal() * dec.Phi.transpose();
  CHECK((R - K).cwiseAbs().maxCoeff() < 1e-8 * K.cwiseAbs().maxCoeff());
}

TEST_CASE("orthonormality, eigen-residual, ordering and trace up to 200 points") {
  std::mt19937_64 gen(10);
  for (Index M : {3, 17, 64, 200}) {
    const MatrixXd K = ksl::test::random_psd(M, gen);
    const DiscreteMeasure p = from_weights(ksl::test::random_simplex(M, gen));
    const SpectralDecomposition dec = mercer_decompose(K, p);
    CHECK(dec.rank == M);
    CHECK(orthonormality_error(dec) < 1e-8);
    CHECK(eigen_residual(K, dec) < 1e-8);
    for (Index k = 1; k < M; ++k) CHECK(dec.eigenvalues(k) <= dec.eigenvalues(k - 1));
    CHECK(dec.eigenvalues.minCoeff() >= 0.0);
    const double trace = (p.masses.array() * K.diagonal().array()).sum();
    CHECK(std::abs(dec.eigenvalues.sum() - trace) < 1e-10 * trace);
  }
}

TEST_CASE("sign convention makes the largest entry positive") {
  std::mt19937_64 gen(12);
  const MatrixXd K = ksl::test::random_psd(15, gen);
  const SpectralDecomposition dec = mercer_decompose(K, uniform_measure(15));
  for (Index k = 0; k < dec.modes(); ++k) {
    Index arg = 0;
    dec.Phi.col(k).cwiseAbs().maxCoeff(&arg);
    CHECK(dec.Phi(arg, k) > 0.0);
  }
}

TEST_CASE("rank threshold splits off numerically zero modes") {
  std::mt19937_64 gen(13);
  const MatrixXd X = ksl::test::random_matrix(30, 4, gen);
  const MatrixXd K = gram(KernelSpec::linear(), X);
  const SpectralDecomposition dec = mercer_decompose(K, uniform_measure(30));
  CHECK(dec.rank == 4);
  CHECK(dec.modes() == 30);
  CHECK(dec.in_eigenvalues().size() == 4);
}

TEST_CASE("asymmetric gram and bad measures are domain errors") {
  MatrixXd K = MatrixXd::Identity(3, 3);
  K(0, 1) = 0.5;
  CHECK(error_kind_of([&] { mercer_decompose(K, uniform_measure(3)); }) == ErrorKind::domain);
  DiscreteMeasure zero;
  zero.masses = VectorXd::Zero(3);
  CHECK(error_kind_of([&] { mercer_decompose(MatrixXd::Identity(3, 3), zero); }) == ErrorKind::domain);
  CHECK(error_kind_of([&] { mercer_decompose(MatrixXd::Identity(3, 3), uniform_measure(4)); }) == ErrorKind::domain);
}

TEST_CASE("nystrom extension reproduces training rows") {
  std::mt19937_64 gen(14);
  const MatrixXd X = ksl::test::random_matrix(25, 3, gen);
  const KernelSpec k = KernelSpec::rbf(1.0);
  const MatrixXd K = gram(k, X);
  const DiscreteMeasure p = from_weights(ksl::test::random_simplex(25, gen));
  const SpectralDecomposition dec = mercer_decompose(K, p);
  const MatrixXd ext = nystrom_extend(dec, K);
  CHECK((ext - dec.Phi.leftCols(dec.rank)).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("zero-eigenvalue modes cannot be extended") {
  std::mt19937_64 gen(15);
  const MatrixXd X = ksl::test::random_matrix(10, 2, gen);
  const MatrixXd K = gram(KernelSpec::linear(), X);
  const SpectralDecomposition dec = mercer_decompose(K, uniform_measure(10));
  CHECK(dec.rank == 2);
  CHECK(error_kind_of([&] { nystrom_extend(dec, K, {0, 5}); }) == ErrorKind::domain);
}

TEST_CASE("linear kernel eigenfunctions are scaled coordinates") {
  // moment-matched sample: empirical covariance diag(v) exactly, so the
  // eigenfunctions under the sample measure are x_rho / sqrt(v_rho)
  VectorXd v(4);
  v << 4.0, 2.0, 1.0, 0.5;
  const Index Q = 400, D = 4;
  const MatrixXd X = moment_match(synth_sample(SyntheticSpec::gaussian(VectorXd::Ones(D)), Q, 31), v);
  const SpectralDecomposition dec = mercer_decompose(gram(KernelSpec::linear(), X), uniform_measure(Q));
  REQUIRE(dec.rank == D);
  for (Index k = 0; k < D; ++k) CHECK(std::abs(dec.eigenvalues(k) - v(k) / D) < 1e-10);
  const MatrixXd Xn = synth_sample(SyntheticSpec::gaussian(v), 50, 32);
  const MatrixXd ext = nystrom_extend(dec, gram(KernelSpec::linear(), Xn, X));
  for (Index k = 0; k < D; ++k) {
    const VectorXd expect = Xn.col(k) / std::sqrt(v(k));
    const double sign = ext.col(k).dot(expect) >= 0 ? 1.0 : -1.0;
    CHECK((sign * ext.col(k) - expect).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("target projection") {
  std::mt19937_64 gen(16);
  const Index M = 12;
  const MatrixXd K = ksl::test::random_psd(M, gen);
  const DiscreteMeasure p = from_weights(ksl::test::random_simplex(M, gen));
  const SpectralDecomposition dec = mercer_decompose(K, p);

  const TargetProjection t1 = project_target(dec, dec.Phi.col(0), p);
  VectorXd e1 = VectorXd::Zero(M);
  e1(0) = 1.0;
  CHECK((t1.abar.col(0) - e1).cwiseAbs().maxCoeff() < 1e-10);

  CHECK(project_target(dec, MatrixXd::Zero(M, 2), p).abar.cwiseAbs().maxCoeff() == 0.0);

  const MatrixXd Y = ksl::test::random_matrix(M, 2, gen);
  const TargetProjection t = project_target(dec, Y, p);
  const MatrixXd R = dec.Phi * t.abar - Y;
  CHECK((p.masses.asDiagonal() * R.array().square().matrix()).sum() < 1e-16);
  for (Index c = 0; c < 2; ++c) {
    const double parseval = t.abar.col(c).squaredNorm();
    const double direct = (p.masses.array() * Y.col(c).array().square()).sum();
    CHECK(std::abs(parseval - direct) < 1e-8);
  }
  CHECK(error_kind_of([&] { project_target(dec, MatrixXd::Zero(M + 1, 1), p); }) == ErrorKind::domain);
}

TEST_CASE("overlap matrix cases") {
  MatrixXd K(2, 2);
  K << 2, 1, 1, 2;
  const SpectralDecomposition dec = mercer_decompose(K, uniform_measure(2));
  const OverlapMatrix O = overlap(dec, dirac_measure(2, 0));
  CHECK((O.O - MatrixXd::Ones(2, 2)).cwiseAbs().maxCoeff() < 1e-14);

  std::mt19937_64 gen(17);
  const Index M = 30;
  const MatrixXd Kr = ksl::test::random_psd(M, gen);
  const DiscreteMeasure p = from_weights(ksl::test::random_simplex(M, gen));
  const SpectralDecomposition d = mercer_decompose(Kr, p);
  CHECK((overlap(d, p).O - MatrixXd::Identity(M, M)).cwiseAbs().maxCoeff() < 1e-8);

  const SpectralDecomposition du = mercer_decompose(Kr, uniform_measure(M));
  const MatrixXd expect = du.Phi.transpose() * du.Phi / static_cast<double>(M);
  CHECK((overlap(du, uniform_measure(M)).O - expect).cwiseAbs().maxCoeff() < 1e-12);

  const DiscreteMeasure pt = from_weights(ksl::test::random_simplex(M, gen));
  const MatrixXd Ot = overlap(d, pt).O;
  CHECK((Ot - Ot.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(symmetric_eigen(Ot).values.minCoeff() >= -1e-10 * Ot.trace());
  double tr = 0.0;
  for (Index mu = 0; mu < M; ++mu) tr += pt.masses(mu) * d.Phi.row(mu).squaredNorm();
  CHECK(std::abs(Ot.trace() - tr) < 1e-10 * tr);
}

TEST_CASE("zero-mass training points get nystrom rows") {
  std::mt19937_64 gen(18);
  const Index M = 10;
  const MatrixXd X = ksl::test::random_matrix(M, 3, gen);
  const MatrixXd K = gram(KernelSpec::rbf(1.5), X);
  VectorXd w = ksl::test::random_simplex(M, gen);
  w(3) = 0.0;
  w(7) = 0.0;
  const DiscreteMeasure p = from_weights(w);
  const SpectralDecomposition dec = mercer_decompose(K, p);
  CHECK(dec.modes() == 8);
  CHECK(!dec.on_support(3));
  CHECK(dec.on_support(4));
  CHECK(orthonormality_error(dec) < 1e-8);
  CHECK(dec.Phi.row(3).head(dec.rank).allFinite());
  // the off-support row equals the extension computed from the kernel row
  const MatrixXd ext = nystrom_extend(dec, K.row(7));
  CHECK((ext - dec.Phi.row(7).head(dec.rank)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("test mass where an out-of-rkhs mode is undefined is flagged") {
  std::mt19937_64 gen(19);
  const Index M = 8;
  const MatrixXd X = ksl::test::random_matrix(M, 2, gen);
  const MatrixXd K = gram(KernelSpec::linear(), X);
  VectorXd w = VectorXd::Ones(M);
  w(0) = 0.0;
  const SpectralDecomposition dec = mercer_decompose(K, from_weights(w));
  CHECK(dec.rank == 2);
  CHECK(overlap(dec, uniform_measure(M)).complete == false);
  CHECK(overlap(dec, from_weights(w)).complete == true);
}

TEST_CASE("cross overlap identities") {
  std::mt19937_64 gen(20);
  const MatrixXd K = ksl::test::random_psd(6, gen);
  const DiscreteMeasure p = from_weights(ksl::test::random_simplex(6, gen));
  const SpectralDecomposition dp = mercer_decompose(K, p);
  const CrossOverlapReport same = cross_overlap_diagnostics(dp, dp, p, p);
  CHECK((same.A - MatrixXd::Identity(6, 6)).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((same.Atilde - MatrixXd::Identity(6, 6)).cwiseAbs().maxCoeff() < 1e-8);

  const MatrixXd X = ksl::test::random_matrix(5, 3, gen);
  const MatrixXd K5 = gram(KernelSpec::rbf(1.0), X);
  const DiscreteMeasure a = from_weights(ksl::test::random_simplex(5, gen));
  const DiscreteMeasure b = from_weights(ksl::test::random_simplex(5, gen));
  const CrossOverlapReport r = cross_overlap_diagnostics(mercer_decompose(K5, a), mercer_decompose(K5, b), a, b);
  CHECK(r.warning.empty());
  CHECK(r.residual_identity < 1e-7);
  CHECK(r.residual_overlap < 1e-7);
  CHECK(r.residual_spectrum < 1e-7);
}

TEST_CASE("rank-deficient cross overlap warns") {
  std::mt19937_64 gen(21);
  const MatrixXd X = ksl::test::random_matrix(6, 2, gen);
  const MatrixXd K = gram(KernelSpec::linear(), X);
  const DiscreteMeasure a = from_weights(ksl::test::random_simplex(6, gen));
  const DiscreteMeasure b = from_weights(ksl::test::random_simplex(6, gen));
  const CrossOverlapReport r = cross_overlap_diagnostics(mercer_decompose(K, a), mercer_decompose(K, b), a, b);
  CHECK(!r.warning.empty());
  CHECK(r.block == 2);
}

TEST_CASE("decomposition cache round trip") {
  const auto dir = ksl::test::temp_dir("spectral_cache");
  std::mt19937_64 gen(22);
  const MatrixXd X = ksl::test::random_matrix(9, 2, gen);
  const MatrixXd K = gram(KernelSpec::linear(), X);
  VectorXd w = ksl::test::random_simplex(9, gen);
  w(4) = 0.0;
  const DiscreteMeasure p = from_weights(w);
  const SpectralDecomposition dec = mercer_decompose(K, p);
  const std::string path = (dir / "d.ksld").string();
  save_decomposition(path, dec);
  const SpectralDecomposition back = load_decomposition(path);
  CHECK(back.rank == dec.rank);
  CHECK(back.support == dec.support);
  CHECK(back.eigenvalues == dec.eigenvalues);
  CHECK(back.masses == dec.masses);
  for (Index i = 0; i < dec.Phi.rows(); ++i)
    for (Index j = 0; j < dec.Phi.cols(); ++j)
      CHECK(((std::isnan(back.Phi(i, j)) && std::isnan(dec.Phi(i, j))) || back.Phi(i, j) == dec.Phi(i, j)));

  const std::string cdir = (dir / "cache").string();
  std::filesystem::create_directories(cdir);
  const SpectralDecomposition first = cached_decompose(cdir, K, p);
  const auto n_files = std::distance(std::filesystem::directory_iterator(cdir), std::filesystem::directory_iterator());
  CHECK(n_files == 1);
  const SpectralDecomposition second = cached_decompose(cdir, K, p);
  CHECK(second.eigenvalues == first.eigenvalues);
  CHECK(decomposition_key(K, p, 1e-12, 0.0) != decomposition_key(K, uniform_measure(9), 1e-12, 0.0));
}
