#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ksl/linalg.hpp"

namespace ksl {

struct Dataset {
  MatrixXd X;  // M x D features
  MatrixXd Y;  // M x C targets
  std::vector<std::string> ids;

  Index M() const { return X.rows(); }
  Index D() const { return X.cols(); }
  Index C() const { return Y.cols(); }
  void validate() const;
};

// Dataset with ids "0".."M-1".
Dataset make_dataset(MatrixXd X, MatrixXd Y);

enum class DataFormat { csv, binary };

Dataset load_dataset(const std::string& path, DataFormat format);
DataFormat format_from_path(const std::string& path);
void save_dataset(const std::string& path, const Dataset& data, DataFormat format);

// Rescale each feature column to zero mean and unit variance. Constant
// columns are centered only.
void standardize_features(Dataset& data);

struct DiscreteMeasure {
  VectorXd masses;
  std::string dataset_ref;

  Index size() const { return masses.size(); }
  // Indices whose mass exceeds threshold (0 means strictly positive).
  std::vector<Index> support(double threshold = 0.0) const;
  void validate() const;
};

DiscreteMeasure uniform_measure(Index M);
DiscreteMeasure from_logits(const VectorXd& z);
// Normalizes nonnegative weights to a measure.
DiscreteMeasure from_weights(const VectorXd& w);
DiscreteMeasure dirac_measure(Index M, Index at);

// P i.i.d. draws with replacement.
std::vector<Index> sample_indices(const DiscreteMeasure& measure, Index P, std::uint64_t seed);

struct SyntheticSpec {
  enum class Family { gaussian_diag, sphere, rectangular };
  Family family = Family::gaussian_diag;
  VectorXd variances;  // gaussian_diag
  double radius = 1.0; // sphere
  Index dimension = 0; // sphere
  VectorXd widths;     // rectangular, per-coordinate standard deviation

  Index dim() const;
  void validate() const;

  static SyntheticSpec gaussian(VectorXd variances);
  static SyntheticSpec sphere(double radius, Index dimension);
  static SyntheticSpec rectangular(VectorXd widths);
};

MatrixXd synth_sample(const SyntheticSpec& spec, Index P, std::uint64_t seed);

// Moment matching: shifts and linearly maps the rows of X so that their
// empirical mean is zero and their empirical covariance (1/n normalization)
// equals diag(variances) exactly. Columns with zero variance are set to 0.
// Needs more rows than nonzero variances.
MatrixXd moment_match(const MatrixXd& X, const VectorXd& variances);

}  // namespace ksl
