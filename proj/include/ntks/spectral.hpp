#pragma once

#include <memory>

#include <Eigen/Dense>

namespace ntks {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using Index = Eigen::Index;

// SVD J = U diag(lambda) V^T of an m x p matrix, with p >= m enforced by
// zero-padding the source. U is m x m, V is p x m. When the decomposition is
// built from a Gram matrix the right vectors are unavailable (zero columns).
struct SpectralDecomposition {
  Mat left_vectors;
  Vec singular_values;
  Mat right_vectors;
  Index source_cols = 0;

  Index rows() const { return left_vectors.rows(); }
  bool has_right_vectors() const { return right_vectors.cols() == left_vectors.cols(); }
};

// Each left singular vector is flipped so that its first entry with
// magnitude above 1e-12 is positive; the paired right vector follows.
SpectralDecomposition svd(const Mat& J);

// Eigenvalues (ascending) and optionally eigenvectors of the symmetrized input.
void symmetric_eigen(const Mat& A, Vec& values, Mat* vectors = nullptr);

// Left singular vectors and singular values of any J with J J^T = G.
SpectralDecomposition gram_decomposition(const Mat& G);

enum class Subspace { Info, Nuisance };

struct InfoNuisanceSplit {
  double cutoff = 0.0;
  Index rank = 0;
  Mat info_basis;       // m x r
  Mat nuisance_basis;   // m x (m - r)
  Vec info_singulars;   // r
  Mat info_right;       // p x r, empty for Gram-built decompositions
  std::shared_ptr<const SpectralDecomposition> parent;
};

// rank = number of singular values >= alpha (ties go to the information space).
InfoNuisanceSplit split_at_cutoff(std::shared_ptr<const SpectralDecomposition> d, double alpha);
InfoNuisanceSplit split_at_cutoff(const SpectralDecomposition& d, double alpha);

Vec project(const InfoNuisanceSplit& split, const Vec& v, Subspace which);

// J_I^+ v = V_I Lambda_I^{-1} U_I^T v.
Vec truncated_pinv_apply(const InfoNuisanceSplit& split, const Vec& v);
// ||J_I^+ v||, available without right singular vectors.
double truncated_pinv_norm(const InfoNuisanceSplit& split, const Vec& v);

// B = sqrt(sum_{s<=r} (alpha/lambda_s)^2 a_s^2 + Gamma^2 sum_{s>r} (lambda_s/alpha)^2 a_s^2)
// with a = U^T r0.
double early_stopping_value(const InfoNuisanceSplit& split, const Vec& r0, double gamma);
double early_stopping_distance(const InfoNuisanceSplit& split, const Vec& r0, double gamma);

Mat psd_sqrt(const Mat& A);

// ||U1 U1^T - U2 U2^T||_op for matrices with orthonormal columns.
double projector_distance(const Mat& U1, const Mat& U2);

double opnorm(const Mat& A);
// Largest eigenvalue magnitude of a symmetric matrix.
double sym_opnorm(const Mat& A);

// Rank at the largest consecutive ratio lambda_s / lambda_{s+1} over
// s = 1..max_rank; lowest index wins ties, a zero successor counts as infinite.
Index gap_rank(const Vec& lambda, Index max_rank);

}  // namespace ntks
