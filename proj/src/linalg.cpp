#include "ksl/linalg.hpp"

#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "ksl/error.hpp"

extern "C" void openblas_set_num_threads(int num_threads);

namespace ksl {

namespace {

// Some OpenBLAS builds pick a kernel set at load time that returns garbage on
// hosts which misreport their CPU features. A small decomposition catches it.
bool lapack_selftest() {
  const lapack_int n = 160;
  MatrixXd A(n, n);
  std::uint64_t state = 0x9e3779b97f4a7c15ULL;
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) {
      state = state * 6364136223846793005ULL + 1442695040888963407ULL;
      A(i, j) = static_cast<double>(state >> 11) * 0x1.0p-53 - 0.5;
    }
  A = (A + A.transpose()).eval();
  MatrixXd V = A;
  VectorXd w(n);
  if (LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'L', n, V.data(), n, w.data()) != 0) return false;
  const double resid = (A * V - V * w.asDiagonal()).cwiseAbs().maxCoeff();
  const double orth = (V.transpose() * V - MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff();
  return resid < 1e-10 && orth < 1e-10;
}

bool use_lapack = true;

}  // namespace

void init_linalg() {
  static const bool done = [] {
    openblas_set_num_threads(1);
    use_lapack = lapack_selftest();
    return true;
  }();
  (void)done;
}

bool lapack_backend_ok() {
  init_linalg();
  return use_lapack;
}

SymmetricEigen symmetric_eigen(const MatrixXd& A) {
  init_linalg();
  const Index n = A.rows();
  require(A.cols() == n, "symmetric_eigen: matrix is not square");
  SymmetricEigen out;
  if (n == 0) return out;
  MatrixXd work;
  VectorXd w;
  if (use_lapack) {
    work = A;
    w.resize(n);
    const lapack_int info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'L', static_cast<lapack_int>(n),
                                           work.data(), static_cast<lapack_int>(n), w.data());
    if (info != 0) fail(ErrorKind::numerical, "dsyevd failed with info " + std::to_string(info));
  } else {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(A);
    if (es.info() != Eigen::Success) fail(ErrorKind::numerical, "symmetric eigensolver did not converge");
    work = es.eigenvectors();
    w = es.eigenvalues();
  }
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (Index k = 0; k < n; ++k) {
    // both backends return ascending order
    const Index src = n - 1 - k;
    out.values(k) = w(src);
    auto col = work.col(src);
    Index arg = 0;
    col.cwiseAbs().maxCoeff(&arg);
    out.vectors.col(k) = col(arg) < 0 ? VectorXd(-col) : VectorXd(col);
  }
  return out;
}

namespace {
double cascade(const double* x, std::size_t n) {
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i];
    return s;
  }
  const std::size_t h = n / 2;
  return cascade(x, h) + cascade(x + h, n - h);
}
}  // namespace

double pairwise_sum(std::span<const double> values) {
  return cascade(values.data(), values.size());
}

MeanStd mean_std(std::span<const double> values) {
  MeanStd r;
  const std::size_t n = values.size();
  if (n == 0) return r;
  r.mean = pairwise_sum(values) / static_cast<double>(n);
  if (n < 2) return r;
  std::vector<double> sq(n);
  for (std::size_t i = 0; i < n; ++i) sq[i] = (values[i] - r.mean) * (values[i] - r.mean);
  r.std = std::sqrt(pairwise_sum(sq) / static_cast<double>(n - 1));
  return r;
}

}  // namespace ksl
