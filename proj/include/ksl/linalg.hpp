#pragma once

#include <Eigen/Dense>
#include <exception>
#include <mutex>
#include <span>

namespace ksl {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// Pins the BLAS thread pool to one thread. Parallelism lives in the callers,
// and a single-threaded BLAS keeps every reduction order fixed.
void init_linalg();

// False when the LAPACK eigensolver failed its startup check and Eigen's
// solver is used instead.
bool lapack_backend_ok();

struct SymmetricEigen {
  VectorXd values;   // descending
  MatrixXd vectors;  // columns match values
};

// Dense symmetric eigensolve (divide and conquer). Eigenvalues come back in
// descending order and each eigenvector has its largest-magnitude entry
// positive.
SymmetricEigen symmetric_eigen(const MatrixXd& A);

// Pairwise (cascade) summation; the result depends only on the input order.
double pairwise_sum(std::span<const double> values);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // n - 1 normalization; 0 for a single value
};
MeanStd mean_std(std::span<const double> values);

// Runs body(i) for i in [0, n). Iterations are handed out dynamically when
// parallel is true; the first exception thrown by any iteration is rethrown
// on the calling thread once the loop finishes.
template <class Body>
void parallel_for(long n, Body&& body, bool parallel = true) {
  std::exception_ptr error;
  std::mutex guard;
#pragma omp parallel for schedule(dynamic, 1) if (parallel)
  for (long i = 0; i < n; ++i) {
    try {
      body(i);
    } catch (...) {
      std::lock_guard<std::mutex> lock(guard);
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace ksl
