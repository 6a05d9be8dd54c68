#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ksl/linalg.hpp"
#include "ksl/measures.hpp"

namespace ksl {

inline constexpr double kDefaultRankThreshold = 1e-12;

// Eigenpairs of K diag(p) Phi = Phi Lambda with Phi^T diag(p) Phi = I on the
// support of p. There is one mode per support point. The leading `rank`
// modes have eigenvalue above rank_threshold * max eigenvalue (in-RKHS);
// the rest are treated as zero. Rows of Phi at points outside the support
// carry Nystrom values for in-RKHS modes and NaN for the others.
struct SpectralDecomposition {
  VectorXd eigenvalues;  // S, descending, clamped at 0
  MatrixXd Phi;          // M x S
  VectorXd masses;       // training measure the basis is orthonormal under
  std::vector<Index> support;
  Index rank = 0;
  double rank_threshold = kDefaultRankThreshold;
  double support_threshold = 0.0;

  Index points() const { return Phi.rows(); }
  Index modes() const { return Phi.cols(); }
  bool on_support(Index mu) const;
  VectorXd in_eigenvalues() const { return eigenvalues.head(rank); }
};

// support_threshold drops points with mass <= threshold * max mass from the
// eigenproblem (0 keeps every positive mass).
SpectralDecomposition mercer_decompose(const MatrixXd& K, const DiscreteMeasure& p,
                                       double rank_threshold = kDefaultRankThreshold,
                                       double support_threshold = 0.0);

// phi_rho(x) = (1/eta_rho) sum_mu p_mu K(x, x_mu) phi_rho(x_mu) for each
// requested in-RKHS mode. K_cross is Q x M over the decomposition's points.
MatrixXd nystrom_extend(const SpectralDecomposition& dec, const MatrixXd& K_cross, const std::vector<Index>& modes);
MatrixXd nystrom_extend(const SpectralDecomposition& dec, const MatrixXd& K_cross);

struct TargetProjection {
  MatrixXd abar;  // S x C
};

TargetProjection project_target(const SpectralDecomposition& dec, const MatrixXd& Y, const DiscreteMeasure& p);

struct OverlapMatrix {
  MatrixXd O;             // S x S
  bool complete = true;   // false when some test mass sits where a mode is undefined
};

// O = sum_mu ptilde_mu phi(x_mu) phi(x_mu)^T with rows of Phi_test aligned to
// the entries of ptilde.
OverlapMatrix overlap(const SpectralDecomposition& dec, const DiscreteMeasure& ptilde, const MatrixXd& Phi_test);
OverlapMatrix overlap(const SpectralDecomposition& dec, const DiscreteMeasure& ptilde);

struct CrossOverlapReport {
  MatrixXd A;        // Phi^T diag(p) Phi~
  MatrixXd Atilde;   // Phi~^T diag(p~) Phi
  MatrixXd O;        // overlap of the p basis under p~
  double residual_identity = 0.0;  // |A~ A - I|_F
  double residual_overlap = 0.0;   // |O - A~^T A~|_F
  double residual_spectrum = 0.0;  // |Lambda~ - A~ Lambda A~^T|_F
  Index block = 0;                 // modes used
  std::string warning;
};

CrossOverlapReport cross_overlap_diagnostics(const SpectralDecomposition& dec_p, const SpectralDecomposition& dec_ptilde,
                                             const DiscreteMeasure& p, const DiscreteMeasure& ptilde);

// Binary cache in the KSL1 container: block one is Phi (M x S); block two is
// M x 3 holding masses, eigenvalues (NaN padded) and
// (rank_threshold, support_threshold, rank) in its first three rows.
void save_decomposition(const std::string& path, const SpectralDecomposition& dec);
SpectralDecomposition load_decomposition(const std::string& path);
std::string decomposition_key(const MatrixXd& K, const DiscreteMeasure& p, double rank_threshold,
                              double support_threshold);

// Looks up <dir>/<key>.ksld, computing and storing it on a miss. An empty dir
// disables caching.
SpectralDecomposition cached_decompose(const std::string& dir, const MatrixXd& K, const DiscreteMeasure& p,
                                       double rank_threshold = kDefaultRankThreshold, double support_threshold = 0.0);

}  // namespace ksl
