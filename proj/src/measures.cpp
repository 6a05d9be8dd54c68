#include "ksl/measures.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "ksl/error.hpp"
#include "ksl/io.hpp"
#include "ksl/rng.hpp"

namespace ksl {

void Dataset::validate() const {
  if (M() < 1) fail(ErrorKind::validation, "dataset has no rows");
  if (D() < 1) fail(ErrorKind::validation, "dataset has no feature columns");
  if (C() < 1) fail(ErrorKind::validation, "dataset has no target columns");
  if (Y.rows() != M()) fail(ErrorKind::validation, "feature and target row counts differ");
  if (static_cast<Index>(ids.size()) != M()) fail(ErrorKind::validation, "id count differs from row count");
  for (Index i = 0; i < M(); ++i) {
    for (Index j = 0; j < D(); ++j)
      if (!std::isfinite(X(i, j)))
        fail(ErrorKind::validation, "non-finite value at row " + std::to_string(i) + ", column f" + std::to_string(j));
    for (Index j = 0; j < C(); ++j)
      if (!std::isfinite(Y(i, j)))
        fail(ErrorKind::validation, "non-finite value at row " + std::to_string(i) + ", column y" + std::to_string(j));
  }
  std::vector<std::string> sorted = ids;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    fail(ErrorKind::validation, "dataset ids are not unique");
}

Dataset make_dataset(MatrixXd X, MatrixXd Y) {
  Dataset d;
  d.X = std::move(X);
  d.Y = std::move(Y);
  d.ids.resize(d.X.rows());
  for (Index i = 0; i < d.X.rows(); ++i) d.ids[i] = std::to_string(i);
  return d;
}

DataFormat format_from_path(const std::string& path) {
  if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".csv") == 0) return DataFormat::csv;
  return DataFormat::binary;
}

Dataset load_dataset(const std::string& path, DataFormat format) {
  Dataset d;
  if (format == DataFormat::csv) {
    CsvTable t = read_csv_numeric(path);
    Index D = 0, C = 0;
    for (std::size_t k = 0; k < t.header.size(); ++k) {
      const std::string& h = t.header[k];
      const bool feat = h == "f" + std::to_string(D);
      const bool targ = h == "y" + std::to_string(C);
      if (feat && C == 0) ++D;
      else if (targ) ++C;
      else
        fail(ErrorKind::parse, path + ": line 1, column " + std::to_string(k + 1) + ": unexpected header '" + h +
                                   "' (expected f0..f{D-1} then y0..y{C-1})");
    }
    if (D == 0 || C == 0) fail(ErrorKind::parse, path + ": header needs at least one f and one y column");
    const Index M = static_cast<Index>(t.rows.size());
    if (M == 0) fail(ErrorKind::parse, path + ": no data rows");
    MatrixXd X(M, D), Y(M, C);
    for (Index i = 0; i < M; ++i) {
      for (Index j = 0; j < D; ++j) X(i, j) = t.rows[i][j];
      for (Index j = 0; j < C; ++j) Y(i, j) = t.rows[i][D + j];
    }
    d = make_dataset(std::move(X), std::move(Y));
  } else {
    BinaryMatrices b = read_binary_matrices(path);
    d = make_dataset(std::move(b.first), std::move(b.second));
  }
  d.validate();
  return d;
}

void save_dataset(const std::string& path, const Dataset& data, DataFormat format) {
  if (format == DataFormat::csv) {
    std::vector<std::string> header;
    for (Index j = 0; j < data.D(); ++j) header.push_back("f" + std::to_string(j));
    for (Index j = 0; j < data.C(); ++j) header.push_back("y" + std::to_string(j));
    MatrixXd all(data.M(), data.D() + data.C());
    all << data.X, data.Y;
    write_csv(path, header, all);
  } else {
    write_binary_matrices(path, data.X, data.Y);
  }
}

void standardize_features(Dataset& data) {
  const double n = static_cast<double>(data.M());
  for (Index j = 0; j < data.D(); ++j) {
    auto col = data.X.col(j);
    const double mean = col.mean();
    col.array() -= mean;
    const double sd = std::sqrt(col.squaredNorm() / n);
    if (sd > 0) col /= sd;
  }
}

std::vector<Index> DiscreteMeasure::support(double threshold) const {
  std::vector<Index> s;
  for (Index i = 0; i < masses.size(); ++i)
    if (masses(i) > threshold) s.push_back(i);
  return s;
}

void DiscreteMeasure::validate() const {
  if (masses.size() == 0) fail(ErrorKind::domain, "measure is empty");
  for (Index i = 0; i < masses.size(); ++i)
    if (!(masses(i) >= 0.0) || !std::isfinite(masses(i)))
      fail(ErrorKind::domain, "measure mass " + std::to_string(i) + " is negative or non-finite");
  const double total = masses.sum();
  if (std::abs(total - 1.0) > 1e-12) fail(ErrorKind::domain, "measure masses sum to " + std::to_string(total));
  if (support().empty()) fail(ErrorKind::domain, "measure has empty support");
}

DiscreteMeasure uniform_measure(Index M) {
  require(M >= 1, "uniform_measure: M must be at least 1");
  DiscreteMeasure m;
  m.masses = VectorXd::Constant(M, 1.0 / static_cast<double>(M));
  return m;
}

DiscreteMeasure from_logits(const VectorXd& z) {
  require(z.size() >= 1, "from_logits: empty logit vector");
  for (Index i = 0; i < z.size(); ++i) require(std::isfinite(z(i)), "from_logits: non-finite logit at " + std::to_string(i));
  const double zmax = z.maxCoeff();
  VectorXd e = (z.array() - zmax).exp();
  std::vector<double> ev(e.data(), e.data() + e.size());
  const double total = pairwise_sum(ev);
  DiscreteMeasure m;
  m.masses = e / total;
  return m;
}

DiscreteMeasure from_weights(const VectorXd& w) {
  require(w.size() >= 1, "from_weights: empty weight vector");
  for (Index i = 0; i < w.size(); ++i)
    require(std::isfinite(w(i)) && w(i) >= 0.0, "from_weights: weight " + std::to_string(i) + " is negative or non-finite");
  std::vector<double> wv(w.data(), w.data() + w.size());
  const double total = pairwise_sum(wv);
  require(total > 0.0, "from_weights: all weights are zero");
  DiscreteMeasure m;
  m.masses = w / total;
  return m;
}

DiscreteMeasure dirac_measure(Index M, Index at) {
  require(M >= 1 && at >= 0 && at < M, "dirac_measure: index out of range");
  DiscreteMeasure m;
  m.masses = VectorXd::Zero(M);
  m.masses(at) = 1.0;
  return m;
}

std::vector<Index> sample_indices(const DiscreteMeasure& measure, Index P, std::uint64_t seed) {
  require(P >= 0, "sample_indices: P must be nonnegative");
  measure.validate();
  auto gen = make_stream(seed, "sample_indices");
  // inverse-CDF lookup on the cumulative masses
  std::vector<double> cdf(measure.size());
  double acc = 0.0;
  for (Index i = 0; i < measure.size(); ++i) {
    acc += measure.masses(i);
    cdf[i] = acc;
  }
  const auto support = measure.support();
  const Index last = support.back();
  std::uniform_real_distribution<double> unif(0.0, acc);
  std::vector<Index> out(P);
  for (Index k = 0; k < P; ++k) {
    const double u = unif(gen);
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    Index idx = it == cdf.end() ? last : static_cast<Index>(it - cdf.begin());
    if (measure.masses(idx) <= 0.0) idx = last;
    out[k] = idx;
  }
  return out;
}

Index SyntheticSpec::dim() const {
  switch (family) {
    case Family::gaussian_diag: return variances.size();
    case Family::sphere: return dimension;
    case Family::rectangular: return widths.size();
  }
  return 0;
}

void SyntheticSpec::validate() const {
  require(dim() >= 1, "synthetic spec has zero dimension");
  switch (family) {
    case Family::gaussian_diag:
      for (Index i = 0; i < variances.size(); ++i)
        require(std::isfinite(variances(i)) && variances(i) >= 0, "gaussian variance must be finite and >= 0");
      break;
    case Family::sphere:
      require(std::isfinite(radius) && radius > 0, "sphere radius must be positive");
      break;
    case Family::rectangular:
      for (Index i = 0; i < widths.size(); ++i)
        require(std::isfinite(widths(i)) && widths(i) >= 0, "rectangular width must be finite and >= 0");
      break;
  }
}

SyntheticSpec SyntheticSpec::gaussian(VectorXd variances) {
  SyntheticSpec s;
  s.family = Family::gaussian_diag;
  s.variances = std::move(variances);
  return s;
}

SyntheticSpec SyntheticSpec::sphere(double radius, Index dimension) {
  SyntheticSpec s;
  s.family = Family::sphere;
  s.radius = radius;
  s.dimension = dimension;
  return s;
}

SyntheticSpec SyntheticSpec::rectangular(VectorXd widths) {
  SyntheticSpec s;
  s.family = Family::rectangular;
  s.widths = std::move(widths);
  return s;
}

MatrixXd synth_sample(const SyntheticSpec& spec, Index P, std::uint64_t seed) {
  require(P >= 1, "synth_sample: P must be at least 1");
  spec.validate();
  const Index D = spec.dim();
  MatrixXd X(P, D);
  auto gen = make_stream(seed, "synth_sample");
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  for (Index i = 0; i < P; ++i) {
    switch (spec.family) {
      case SyntheticSpec::Family::gaussian_diag:
        for (Index j = 0; j < D; ++j) {
          const double g = normal(gen);
          X(i, j) = spec.variances(j) > 0 ? std::sqrt(spec.variances(j)) * g : 0.0;
        }
        break;
      case SyntheticSpec::Family::sphere: {
        double n2 = 0.0;
        do {
          for (Index j = 0; j < D; ++j) X(i, j) = normal(gen);
          n2 = X.row(i).squaredNorm();
        } while (n2 == 0.0);
        X.row(i) *= spec.radius / std::sqrt(n2);
        break;
      }
      case SyntheticSpec::Family::rectangular:
        for (Index j = 0; j < D; ++j) X(i, j) = std::sqrt(3.0) * spec.widths(j) * unif(gen);
        break;
    }
  }
  return X;
}

MatrixXd moment_match(const MatrixXd& X, const VectorXd& variances) {
  require(X.cols() == variances.size(), "moment_match: dimension mismatch");
  std::vector<Index> active;
  for (Index j = 0; j < variances.size(); ++j) {
    require(variances(j) >= 0, "moment_match: negative variance");
    if (variances(j) > 0) active.push_back(j);
  }
  const Index n = X.rows();
  require(n > static_cast<Index>(active.size()), "moment_match: need more rows than active dimensions");
  MatrixXd out = MatrixXd::Zero(n, X.cols());
  if (active.empty()) return out;
  MatrixXd Z(n, static_cast<Index>(active.size()));
  for (Index k = 0; k < Z.cols(); ++k) Z.col(k) = X.col(active[k]);
  Z.rowwise() -= Z.colwise().mean();
  const MatrixXd S = Z.transpose() * Z / static_cast<double>(n);
  Eigen::LLT<MatrixXd> llt(S);
  if (llt.info() != Eigen::Success) fail(ErrorKind::numerical, "moment_match: sample covariance is singular");
  // Z L^{-T} has identity covariance
  const MatrixXd W = llt.matrixL().solve(Z.transpose()).transpose();
  for (Index k = 0; k < W.cols(); ++k) out.col(active[k]) = std::sqrt(variances(active[k])) * W.col(k);
  return out;
}

}  // namespace ksl
