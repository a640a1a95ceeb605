#include "ntks/ntk.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "ntks/rng.hpp"

namespace ntks {

namespace {

constexpr int kChunk = 1024;

struct ChunkSums {
  Mat first;   // sum of d d^T
  Mat second;  // sum of (d .* d)(d .* d)^T
};

ChunkSums chunk_sums(const Mat& X, const Activation& act, int count, std::uint64_t seed) {
  Rng rng(seed);
  const Mat G = rng.normal_matrix(X.cols(), count);
  Mat D = X * G;  // n x count
  for (Index j = 0; j < D.cols(); ++j)
    for (Index i = 0; i < D.rows(); ++i) D(i, j) = act.dphi(D(i, j));
  const Mat D2 = D.cwiseProduct(D);
  return {D * D.transpose(), D2 * D2.transpose()};
}

Mat kron_identity(const Mat& base, Index K) {
  const Index n = base.rows();
  Mat out = Mat::Zero(K * n, K * n);
  for (Index l = 0; l < K; ++l) out.block(l * n, l * n, n, n) = base;
  return out;
}

}  // namespace

KernelMatrix mc_kernel(const Mat& X, const Activation& act, int num_samples, std::uint64_t seed,
                       Index num_classes, int threads) {
  require(num_samples >= 1, ErrorCode::InvalidArgument, "num_samples must be >= 1");
  require(num_classes >= 1, ErrorCode::InvalidArgument, "num_classes must be >= 1");
  require(X.allFinite(), ErrorCode::NonFinite, "kernel input");
  const Index n = X.rows();
  const int chunks = (num_samples + kChunk - 1) / kChunk;
  auto chunk_count = [&](int c) { return std::min(kChunk, num_samples - c * kChunk); };

  Mat S1 = Mat::Zero(n, n);
  Mat S2 = Mat::Zero(n, n);
  if (threads <= 1 || chunks == 1) {
    for (int c = 0; c < chunks; ++c) {
      const ChunkSums cs = chunk_sums(X, act, chunk_count(c), derive_seed(seed, c));
      S1 += cs.first;
      S2 += cs.second;
    }
  } else {
    std::vector<ChunkSums> parts(chunks);
    std::vector<std::thread> pool;
    const int nt = std::min(threads, chunks);
    for (int t = 0; t < nt; ++t) {
      pool.emplace_back([&, t] {
        for (int c = t; c < chunks; c += nt)
          parts[c] = chunk_sums(X, act, chunk_count(c), derive_seed(seed, c));
      });
    }
    for (auto& th : pool) th.join();
    for (int c = 0; c < chunks; ++c) {
      S1 += parts[c].first;
      S2 += parts[c].second;
    }
  }

  const double S = static_cast<double>(num_samples);
  const Mat gram = X * X.transpose();
  KernelMatrix km;
  km.base = (S1 / S).cwiseProduct(gram);
  const Mat m2 = (S2 / S).cwiseProduct(gram.cwiseProduct(gram));
  Mat var = (m2 - km.base.cwiseProduct(km.base)).cwiseMax(0.0);
  if (num_samples > 1) var *= S / (S - 1.0);
  km.standard_error = (var / S).cwiseSqrt();
  km.num_classes = num_classes;
  km.mc_samples = num_samples;
  km.seed = seed;
  return km;
}

Mat multiclass_kernel(const KernelMatrix& km) { return kron_identity(km.base, km.num_classes); }

Mat clamp_psd(const Mat& base) {
  require(base.rows() == base.cols(), ErrorCode::DimensionMismatch, "kernel must be square");
  const Index n = base.rows();
  if (n == 0) return base;
  const Mat sym = 0.5 * (base + base.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> eig(sym);
  const Vec& lam = eig.eigenvalues();
  const double floor = -1e-8 * sym.trace() / static_cast<double>(n);
  require(lam.minCoeff() >= floor, ErrorCode::NotPsd,
          "kernel eigenvalue " + std::to_string(lam.minCoeff()) + " below clamp floor");
  if (lam.minCoeff() >= 0.0) return sym;
  const Mat R = eig.eigenvectors() * lam.cwiseMax(0.0).asDiagonal() * eig.eigenvectors().transpose();
  return 0.5 * (R + R.transpose());
}

Mat multiclass_kernel_sqrt(const KernelMatrix& km) {
  return kron_identity(psd_sqrt(clamp_psd(km.base)), km.num_classes);
}

Mat jacobian_gram(const Mat& V, const Mat& D, const Mat& X) {
  const Index K = V.rows(), n = X.rows();
  require(D.rows() == n && D.cols() == V.cols(), ErrorCode::DimensionMismatch, "gram factors");
  const Mat gram = X * X.transpose();
  Mat C(K * n, K * n);
  for (Index a = 0; a < K; ++a) {
    for (Index b = a; b < K; ++b) {
      const Vec w = V.row(a).transpose().cwiseProduct(V.row(b).transpose());
      const Mat blk = (D * w.asDiagonal() * D.transpose()).cwiseProduct(gram);
      C.block(a * n, b * n, n, n) = blk;
      if (b != a) C.block(b * n, a * n, n, n) = blk.transpose();
    }
  }
  return C;
}

Mat empirical_kernel(const ShallowNet& net, const Mat& X) {
  return jacobian_gram(net.V, activation_derivatives(net, X), X);
}

double concentration_gap(const ShallowNet& net, const Mat& X, const KernelMatrix& km, double nu) {
  require(nu > 0.0, ErrorCode::InvalidArgument, "nu must be > 0");
  require(km.base.rows() == X.rows() && km.num_classes == net.K(), ErrorCode::DimensionMismatch,
          "kernel does not match network/data");
  const double scale = static_cast<double>(net.K()) / (nu * nu);
  return sym_opnorm(scale * empirical_kernel(net, X) - multiclass_kernel(km));
}

double kernel_error_scale(const KernelMatrix& km) { return km.standard_error.norm(); }

Mat cluster_lift(const std::vector<int>& assignments, Index KC) {
  require(KC >= 1, ErrorCode::InvalidArgument, "KC must be >= 1");
  Mat U = Mat::Zero(static_cast<Index>(assignments.size()), KC);
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    const int c = assignments[i];
    require(c >= 0 && c < KC, ErrorCode::InvalidArgument,
            "cluster index " + std::to_string(c) + " out of range");
    U(static_cast<Index>(i), c) = 1.0;
  }
  return U;
}

KernelPerturbation kernel_perturbation(const Mat& X_clean, const Mat& X_noisy,
                                       const Activation& act, Index r, int samples,
                                       std::uint64_t seed) {
  require(X_clean.rows() == X_noisy.rows() && X_clean.cols() == X_noisy.cols(),
          ErrorCode::DimensionMismatch, "clean/noisy shapes");
  require(r >= 0 && r <= X_clean.rows(), ErrorCode::InvalidArgument, "r must be in [0, n]");
  const KernelMatrix a = mc_kernel(X_clean, act, samples, seed);
  const KernelMatrix b = mc_kernel(X_noisy, act, samples, seed);
  KernelPerturbation out;
  out.norm_gap = sym_opnorm(b.base - a.base);
  const SpectralDecomposition da = gram_decomposition(a.base);
  const SpectralDecomposition db = gram_decomposition(b.base);
  out.projector_gap = projector_distance(da.left_vectors.leftCols(r), db.left_vectors.leftCols(r));
  return out;
}

HadamardBounds hadamard_eigen_bounds(const Mat& A, const Mat& B) {
  require(A.rows() == A.cols() && B.rows() == B.cols() && A.rows() == B.rows(),
          ErrorCode::DimensionMismatch, "Hadamard factors");
  Eigen::SelfAdjointEigenSolver<Mat> eig(0.5 * (A + A.transpose()), Eigen::EigenvaluesOnly);
  const Vec diag = B.diagonal();
  return {diag.minCoeff() * eig.eigenvalues().minCoeff(),
          diag.maxCoeff() * eig.eigenvalues().maxCoeff()};
}

}  // namespace ntks
