#include "ksl/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>

#include "ksl/error.hpp"
#include "ksl/io.hpp"

namespace ksl {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

bool SpectralDecomposition::on_support(Index mu) const {
  return std::binary_search(support.begin(), support.end(), mu);
}

SpectralDecomposition mercer_decompose(const MatrixXd& K, const DiscreteMeasure& p, double rank_threshold,
                                       double support_threshold) {
  const Index M = K.rows();
  require(K.cols() == M, "mercer_decompose: Gram matrix is not square");
  require(p.size() == M, "mercer_decompose: measure length differs from Gram size");
  require(p.support().size() > 0 && p.masses.sum() > 0, "mercer_decompose: all-zero measure");
  p.validate();
  const double scale = std::max(K.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
  if ((K - K.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    fail(ErrorKind::domain, "mercer_decompose: Gram matrix is not symmetric");

  SpectralDecomposition dec;
  dec.masses = p.masses;
  dec.rank_threshold = rank_threshold;
  dec.support_threshold = support_threshold;
  dec.support = p.support(support_threshold * p.masses.maxCoeff());
  const Index S = static_cast<Index>(dec.support.size());

  VectorXd sq(S);
  for (Index a = 0; a < S; ++a) sq(a) = std::sqrt(p.masses(dec.support[a]));
  MatrixXd B(S, S);
  for (Index b = 0; b < S; ++b)
    for (Index a = 0; a < S; ++a) B(a, b) = sq(a) * K(dec.support[a], dec.support[b]) * sq(b);
  // exact symmetry for the solver
  B = 0.5 * (B + B.transpose()).eval();

  SymmetricEigen eig = symmetric_eigen(B);
  dec.eigenvalues = eig.values.cwiseMax(0.0);
  const double eta_max = dec.eigenvalues.size() ? dec.eigenvalues(0) : 0.0;
  dec.rank = 0;
  if (eta_max > 0)
    while (dec.rank < S && dec.eigenvalues(dec.rank) > rank_threshold * eta_max) ++dec.rank;

  dec.Phi = MatrixXd::Constant(M, S, kNaN);
  for (Index a = 0; a < S; ++a) dec.Phi.row(dec.support[a]) = eig.vectors.row(a) / sq(a);

  if (S < M && dec.rank > 0) {
    std::vector<Index> off;
    for (Index mu = 0, a = 0; mu < M; ++mu) {
      if (a < S && dec.support[a] == mu) {
        ++a;
        continue;
      }
      off.push_back(mu);
    }
    MatrixXd Kc(static_cast<Index>(off.size()), M);
    for (Index r = 0; r < Kc.rows(); ++r) Kc.row(r) = K.row(off[r]);
    const MatrixXd ext = nystrom_extend(dec, Kc);
    for (Index r = 0; r < Kc.rows(); ++r) dec.Phi.row(off[r]).head(dec.rank) = ext.row(r);
  }
  return dec;
}

MatrixXd nystrom_extend(const SpectralDecomposition& dec, const MatrixXd& K_cross, const std::vector<Index>& modes) {
  require(K_cross.cols() == dec.points(), "nystrom_extend: K_cross must have one column per decomposition point");
  for (Index rho : modes) {
    require(rho >= 0 && rho < dec.modes(), "nystrom_extend: mode index out of range");
    require(rho < dec.rank && dec.eigenvalues(rho) > 0,
            "nystrom_extend: mode " + std::to_string(rho) + " has zero eigenvalue and cannot be extended");
  }
  const Index S = static_cast<Index>(dec.support.size());
  const Index n = static_cast<Index>(modes.size());
  // W(a, k) = p_a phi_k(x_a) / eta_k over the support
  MatrixXd W(S, n);
  for (Index k = 0; k < n; ++k) {
    const Index rho = modes[k];
    for (Index a = 0; a < S; ++a) {
      const Index mu = dec.support[a];
      W(a, k) = dec.masses(mu) * dec.Phi(mu, rho) / dec.eigenvalues(rho);
    }
  }
  MatrixXd Ks(K_cross.rows(), S);
  for (Index a = 0; a < S; ++a) Ks.col(a) = K_cross.col(dec.support[a]);
  return Ks * W;
}

MatrixXd nystrom_extend(const SpectralDecomposition& dec, const MatrixXd& K_cross) {
  std::vector<Index> modes(dec.rank);
  for (Index k = 0; k < dec.rank; ++k) modes[k] = k;
  return nystrom_extend(dec, K_cross, modes);
}

TargetProjection project_target(const SpectralDecomposition& dec, const MatrixXd& Y, const DiscreteMeasure& p) {
  require(Y.rows() == dec.points(), "project_target: target rows differ from decomposition points");
  require(p.size() == dec.points(), "project_target: measure length differs from decomposition points");
  TargetProjection t;
  t.abar = MatrixXd::Zero(dec.modes(), Y.cols());
  for (Index mu : dec.support) t.abar.noalias() += p.masses(mu) * dec.Phi.row(mu).transpose() * Y.row(mu);
  return t;
}

OverlapMatrix overlap(const SpectralDecomposition& dec, const DiscreteMeasure& ptilde, const MatrixXd& Phi_test) {
  require(Phi_test.rows() == ptilde.size(), "overlap: Phi_test rows differ from test measure length");
  require(Phi_test.cols() == dec.modes(), "overlap: Phi_test columns differ from mode count");
  OverlapMatrix out;
  const Index S = dec.modes();
  out.O = MatrixXd::Zero(S, S);
  std::vector<char> undefined(S, 0);
  for (Index mu = 0; mu < ptilde.size(); ++mu) {
    const double w = ptilde.masses(mu);
    if (w <= 0) continue;
    VectorXd row = Phi_test.row(mu).transpose();
    for (Index k = 0; k < S; ++k)
      if (std::isnan(row(k))) {
        undefined[k] = 1;
        row(k) = 0.0;
      }
    out.O.noalias() += w * row * row.transpose();
  }
  for (Index k = 0; k < S; ++k)
    if (undefined[k]) {
      out.complete = false;
      out.O.row(k).setConstant(kNaN);
      out.O.col(k).setConstant(kNaN);
    }
  return out;
}

OverlapMatrix overlap(const SpectralDecomposition& dec, const DiscreteMeasure& ptilde) {
  return overlap(dec, ptilde, dec.Phi);
}

CrossOverlapReport cross_overlap_diagnostics(const SpectralDecomposition& dec_p, const SpectralDecomposition& dec_ptilde,
                                             const DiscreteMeasure& p, const DiscreteMeasure& ptilde) {
  require(dec_p.points() == dec_ptilde.points() && p.size() == dec_p.points() && ptilde.size() == dec_p.points(),
          "cross_overlap_diagnostics: decompositions must share one dataset");
  CrossOverlapReport r;
  const Index n = std::min(dec_p.rank, dec_ptilde.rank);
  r.block = n;
  const bool full = dec_p.rank == dec_p.points() && dec_ptilde.rank == dec_ptilde.points();
  if (!full) r.warning = "rank deficient; identities evaluated on the leading " + std::to_string(n) + " modes";
  const MatrixXd Phi = dec_p.Phi.leftCols(n);
  const MatrixXd Pt = dec_ptilde.Phi.leftCols(n);
  if (!Phi.allFinite() || !Pt.allFinite())
    fail(ErrorKind::domain, "cross_overlap_diagnostics: eigenfunctions undefined on part of the dataset");
  r.A = Phi.transpose() * p.masses.asDiagonal() * Pt;
  r.Atilde = Pt.transpose() * ptilde.masses.asDiagonal() * Phi;
  r.O = Phi.transpose() * ptilde.masses.asDiagonal() * Phi;
  r.residual_identity = (r.Atilde * r.A - MatrixXd::Identity(n, n)).norm();
  r.residual_overlap = (r.O - r.Atilde.transpose() * r.Atilde).norm();
  const MatrixXd lam_t = dec_ptilde.eigenvalues.head(n).asDiagonal();
  r.residual_spectrum =
      (lam_t - r.Atilde * dec_p.eigenvalues.head(n).asDiagonal() * r.Atilde.transpose()).norm();
  return r;
}

void save_decomposition(const std::string& path, const SpectralDecomposition& dec) {
  const Index M = dec.points();
  require(M >= 3, "save_decomposition: need at least three points");
  MatrixXd meta = MatrixXd::Constant(M, 3, kNaN);
  meta.col(0) = dec.masses;
  meta.col(1).head(dec.modes()) = dec.eigenvalues;
  meta(0, 2) = dec.rank_threshold;
  meta(1, 2) = dec.support_threshold;
  meta(2, 2) = static_cast<double>(dec.rank);
  write_binary_matrices(path, dec.Phi, meta);
}

SpectralDecomposition load_decomposition(const std::string& path) {
  BinaryMatrices b = read_binary_matrices(path);
  if (b.second.cols() != 3) fail(ErrorKind::parse, path + ": not a decomposition cache");
  SpectralDecomposition dec;
  dec.Phi = std::move(b.first);
  const MatrixXd& meta = b.second;
  dec.masses = meta.col(0);
  dec.eigenvalues = meta.col(1).head(dec.Phi.cols());
  dec.rank_threshold = meta(0, 2);
  dec.support_threshold = meta(1, 2);
  dec.rank = static_cast<Index>(meta(2, 2));
  DiscreteMeasure p{dec.masses, ""};
  dec.support = p.support(dec.support_threshold * dec.masses.maxCoeff());
  if (static_cast<Index>(dec.support.size()) != dec.modes() || dec.rank > dec.modes())
    fail(ErrorKind::parse, path + ": inconsistent decomposition cache");
  return dec;
}

std::string decomposition_key(const MatrixXd& K, const DiscreteMeasure& p, double rank_threshold,
                              double support_threshold) {
  Hasher h;
  h.update(std::string_view("ksl-decomposition-v1"));
  h.update(K);
  h.update(p.masses);
  h.update(rank_threshold);
  h.update(support_threshold);
  return h.hex();
}

SpectralDecomposition cached_decompose(const std::string& dir, const MatrixXd& K, const DiscreteMeasure& p,
                                       double rank_threshold, double support_threshold) {
  if (dir.empty() || K.rows() < 3) return mercer_decompose(K, p, rank_threshold, support_threshold);
  const std::string path =
      (std::filesystem::path(dir) / (decomposition_key(K, p, rank_threshold, support_threshold) + ".ksld")).string();
  if (std::filesystem::exists(path)) return load_decomposition(path);
  SpectralDecomposition dec = mercer_decompose(K, p, rank_threshold, support_threshold);
  save_decomposition(path, dec);
  return dec;
}

}  // namespace ksl
