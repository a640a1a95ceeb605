#include "ntks/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include <Eigen/SVD>
#include <lapacke.h>

#include "ntks/errors.hpp"

extern "C" void openblas_set_num_threads(int num_threads);

namespace ntks {

namespace {

void apply_sign_convention(Mat& U, Mat& V) {
  const bool with_right = V.cols() == U.cols();
  for (Index s = 0; s < U.cols(); ++s) {
    for (Index i = 0; i < U.rows(); ++i) {
      if (std::abs(U(i, s)) > 1e-12) {
        if (U(i, s) < 0.0) {
          U.col(s) *= -1.0;
          if (with_right) V.col(s) *= -1.0;
        }
        break;
      }
    }
  }
}

void require_finite(const Mat& A, const char* what) {
  require(A.allFinite(), ErrorCode::NonFinite, what);
}

}  // namespace

SpectralDecomposition svd(const Mat& J) {
  require_finite(J, "svd input");
  const Index m = J.rows();
  const Index p = J.cols();
  SpectralDecomposition out;
  out.source_cols = p;
  if (m == 0) {
    out.right_vectors = Mat::Zero(std::max<Index>(p, 0), 0);
    return out;
  }
  Mat padded;
  const Mat* src = &J;
  if (p < m) {
    padded = Mat::Zero(m, m);
    padded.leftCols(p) = J;
    src = &padded;
  }
  Eigen::BDCSVD<Mat> solver(*src, Eigen::ComputeThinU | Eigen::ComputeThinV);
  out.left_vectors = solver.matrixU();
  out.singular_values = solver.singularValues();
  out.right_vectors = solver.matrixV();
  apply_sign_convention(out.left_vectors, out.right_vectors);
  return out;
}

void symmetric_eigen(const Mat& A, Vec& values, Mat* vectors) {
  require(A.rows() == A.cols(), ErrorCode::DimensionMismatch, "matrix must be square");
  require_finite(A, "eigen input");
  const Index m = A.rows();
  Mat work = 0.5 * (A + A.transpose());
  values.resize(m);
  if (m == 0) {
    if (vectors) vectors->resize(0, 0);
    return;
  }
  // Keep a single run single-threaded and reproducible regardless of host core count.
  static const bool single_threaded = [] {
    openblas_set_num_threads(1);
    return true;
  }();
  (void)single_threaded;
  const lapack_int info =
      LAPACKE_dsyevd(LAPACK_COL_MAJOR, vectors ? 'V' : 'N', 'L', static_cast<lapack_int>(m),
                     work.data(), static_cast<lapack_int>(m), values.data());
  require(info == 0, ErrorCode::NonFinite, "symmetric eigensolver failed to converge");
  if (vectors) *vectors = std::move(work);
}

SpectralDecomposition gram_decomposition(const Mat& G) {
  require_finite(G, "gram input");
  require(G.rows() == G.cols(), ErrorCode::DimensionMismatch, "gram matrix must be square");
  const Index m = G.rows();
  Vec values;
  Mat vectors;
  symmetric_eigen(G, values, &vectors);
  SpectralDecomposition out;
  out.source_cols = m;
  out.left_vectors.resize(m, m);
  out.singular_values.resize(m);
  for (Index s = 0; s < m; ++s) {
    const Index src = m - 1 - s;  // ascending to descending
    out.left_vectors.col(s) = vectors.col(src);
    out.singular_values(s) = std::sqrt(std::max(values(src), 0.0));
  }
  out.right_vectors = Mat::Zero(0, 0);
  apply_sign_convention(out.left_vectors, out.right_vectors);
  return out;
}

InfoNuisanceSplit split_at_cutoff(std::shared_ptr<const SpectralDecomposition> d, double alpha) {
  require(d != nullptr, ErrorCode::InvalidArgument, "null decomposition");
  require(std::isfinite(alpha) && alpha >= 0.0, ErrorCode::InvalidCutoff,
          "cutoff must be a finite nonnegative number");
  const Vec& lam = d->singular_values;
  const Index m = lam.size();
  const double top = m > 0 ? lam(0) : 0.0;
  if (alpha > top)
    fail(ErrorCode::CutoffTooLarge,
         "cutoff " + std::to_string(alpha) + " exceeds top singular value " + std::to_string(top));
  Index r = 0;
  while (r < m && lam(r) >= alpha) ++r;

  InfoNuisanceSplit split;
  split.cutoff = alpha;
  split.rank = r;
  split.info_basis = d->left_vectors.leftCols(r);
  split.nuisance_basis = d->left_vectors.rightCols(m - r);
  split.info_singulars = lam.head(r);
  if (d->has_right_vectors()) split.info_right = d->right_vectors.leftCols(r);
  split.parent = std::move(d);
  return split;
}

InfoNuisanceSplit split_at_cutoff(const SpectralDecomposition& d, double alpha) {
  return split_at_cutoff(std::make_shared<const SpectralDecomposition>(d), alpha);
}

Vec project(const InfoNuisanceSplit& split, const Vec& v, Subspace which) {
  const Index m = split.info_basis.rows();
  require(v.size() == m, ErrorCode::DimensionMismatch, "projection vector length");
  if (which == Subspace::Info) return split.info_basis * (split.info_basis.transpose() * v);
  return split.nuisance_basis * (split.nuisance_basis.transpose() * v);
}

Vec truncated_pinv_apply(const InfoNuisanceSplit& split, const Vec& v) {
  require(v.size() == split.info_basis.rows(), ErrorCode::DimensionMismatch,
          "pseudoinverse vector length");
  require(split.rank > 0, ErrorCode::EmptyInfoSpace, "truncated pseudoinverse needs r >= 1");
  require(split.info_right.cols() == split.rank, ErrorCode::InvalidArgument,
          "decomposition has no right singular vectors");
  Vec coeff = split.info_basis.transpose() * v;
  for (Index s = 0; s < split.rank; ++s) {
    require(split.info_singulars(s) > 0.0, ErrorCode::DivisionByZero,
            "zero singular value in information space");
    coeff(s) /= split.info_singulars(s);
  }
  return split.info_right * coeff;
}

double truncated_pinv_norm(const InfoNuisanceSplit& split, const Vec& v) {
  require(v.size() == split.info_basis.rows(), ErrorCode::DimensionMismatch,
          "pseudoinverse vector length");
  require(split.rank > 0, ErrorCode::EmptyInfoSpace, "truncated pseudoinverse needs r >= 1");
  Vec coeff = split.info_basis.transpose() * v;
  for (Index s = 0; s < split.rank; ++s) {
    require(split.info_singulars(s) > 0.0, ErrorCode::DivisionByZero,
            "zero singular value in information space");
    coeff(s) /= split.info_singulars(s);
  }
  return coeff.norm();
}

double early_stopping_value(const InfoNuisanceSplit& split, const Vec& r0, double gamma) {
  require(split.parent != nullptr, ErrorCode::InvalidArgument, "split without decomposition");
  require(gamma >= 1.0, ErrorCode::InvalidArgument, "Gamma must be >= 1");
  const SpectralDecomposition& d = *split.parent;
  require(r0.size() == d.rows(), ErrorCode::DimensionMismatch, "residual length");
  const Vec a = d.left_vectors.transpose() * r0;
  const double alpha = split.cutoff;
  const Vec& lam = d.singular_values;
  double info = 0.0;
  for (Index s = 0; s < split.rank; ++s) {
    if (lam(s) > 0.0) {
      const double ratio = alpha / lam(s);
      info += ratio * ratio * a(s) * a(s);
    }
  }
  double nuisance = 0.0;
  for (Index s = split.rank; s < lam.size(); ++s) {
    if (lam(s) == 0.0) continue;
    require(alpha > 0.0, ErrorCode::DivisionByZero, "alpha = 0 with nonempty nuisance space");
    const double ratio = lam(s) / alpha;
    nuisance += ratio * ratio * a(s) * a(s);
  }
  return std::sqrt(info + gamma * gamma * nuisance);
}

double early_stopping_distance(const InfoNuisanceSplit& split, const Vec& r0, double gamma) {
  require(split.cutoff > 0.0, ErrorCode::DivisionByZero, "early stopping distance needs alpha > 0");
  return early_stopping_value(split, r0, gamma) / split.cutoff;
}

Mat psd_sqrt(const Mat& A) {
  require_finite(A, "psd_sqrt input");
  require(A.rows() == A.cols(), ErrorCode::DimensionMismatch, "psd_sqrt needs a square matrix");
  if (A.rows() == 0) return A;
  const double scale = std::max(1.0, A.cwiseAbs().maxCoeff());
  require((A - A.transpose()).cwiseAbs().maxCoeff() <= 1e-10 * scale, ErrorCode::NotPsd,
          "matrix is not symmetric");
  Eigen::SelfAdjointEigenSolver<Mat> eig(0.5 * (A + A.transpose()));
  Vec lam = eig.eigenvalues();
  const double tol = 1e-10 * std::max(1.0, std::abs(lam(lam.size() - 1)));
  require(lam.minCoeff() >= -tol, ErrorCode::NotPsd,
          "eigenvalue " + std::to_string(lam.minCoeff()) + " below tolerance");
  lam = lam.cwiseMax(0.0).cwiseSqrt();
  Mat R = eig.eigenvectors() * lam.asDiagonal() * eig.eigenvectors().transpose();
  return 0.5 * (R + R.transpose());
}

double projector_distance(const Mat& U1, const Mat& U2) {
  require(U1.rows() == U2.rows(), ErrorCode::DimensionMismatch, "projector ambient dimension");
  auto check = [](const Mat& U) {
    const Mat gram = U.transpose() * U;
    const double dev =
        gram.size() == 0 ? 0.0 : (gram - Mat::Identity(U.cols(), U.cols())).cwiseAbs().maxCoeff();
    require(dev <= 1e-8, ErrorCode::NotOrthonormal, "deviation " + std::to_string(dev));
  };
  check(U1);
  check(U2);
  const Mat diff = U1 * U1.transpose() - U2 * U2.transpose();
  return sym_opnorm(diff);
}

double opnorm(const Mat& A) {
  if (A.size() == 0) return 0.0;
  const Mat G = A.rows() <= A.cols() ? Mat(A * A.transpose()) : Mat(A.transpose() * A);
  Eigen::SelfAdjointEigenSolver<Mat> eig(G, Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(eig.eigenvalues().maxCoeff(), 0.0));
}

double sym_opnorm(const Mat& A) {
  if (A.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Mat> eig(0.5 * (A + A.transpose()), Eigen::EigenvaluesOnly);
  return eig.eigenvalues().cwiseAbs().maxCoeff();
}

Index gap_rank(const Vec& lambda, Index max_rank) {
  const Index m = lambda.size();
  require(m >= 2, ErrorCode::InvalidArgument, "gap search needs at least two values");
  require(lambda(0) > 0.0, ErrorCode::InvalidArgument, "spectrum is identically zero");
  const Index top = std::clamp<Index>(max_rank, 1, m - 1);
  Index best = 1;
  double best_ratio = -1.0;
  for (Index s = 1; s <= top; ++s) {
    const double next = lambda(s);
    const double ratio = next > 0.0 ? lambda(s - 1) / next : std::numeric_limits<double>::infinity();
    if (ratio > best_ratio) {
      best_ratio = ratio;
      best = s;
    }
    if (next <= 0.0) break;
  }
  return best;
}

}  // namespace ntks
