#pragma once

#include <cstdint>
#include <vector>

#include "ntks/shallownet.hpp"
#include "ntks/spectral.hpp"

namespace ntks {

// Monte-Carlo estimate of E[phi'(Xw) phi'(Xw)^T] .* X X^T over w ~ N(0, I_d).
// The multiclass kernel is I_K (x) base.
struct KernelMatrix {
  Mat base;
  Mat standard_error;  // per-entry sample std / sqrt(num_samples)
  Index num_classes = 1;
  int mc_samples = 0;
  std::uint64_t seed = 0;
};

// Samples are drawn in fixed-size chunks with per-chunk seeds, and chunk sums
// are combined in chunk order, so the result does not depend on `threads`.
KernelMatrix mc_kernel(const Mat& X, const Activation& act, int num_samples, std::uint64_t seed,
                       Index num_classes = 1, int threads = 1);

Mat multiclass_kernel(const KernelMatrix& km);

// Eigenvalues of the base kernel above -1e-8 trace/n are clamped to zero;
// anything lower is reported as NotPsd.
Mat clamp_psd(const Mat& base);
// (I_K (x) base)^{1/2} after clamping.
Mat multiclass_kernel_sqrt(const KernelMatrix& km);

// J J^T assembled blockwise from phi'(X W^T) without forming J.
Mat empirical_kernel(const ShallowNet& net, const Mat& X);

// Blockwise Gram of the Jacobian-shaped matrix whose blocks are
// V_{l,s} diag(D[:, s]) X, for an arbitrary n x k matrix D.
Mat jacobian_gram(const Mat& V, const Mat& D, const Mat& X);

// ||(K / nu^2) J(W_0) J(W_0)^T - I_K (x) base||_op.
double concentration_gap(const ShallowNet& net, const Mat& X, const KernelMatrix& km, double nu);

// Frobenius norm of the kernel standard-error matrix: an operator-norm scale
// for the Monte-Carlo error of I_K (x) base.
double kernel_error_scale(const KernelMatrix& km);

// n x KC 0-1 matrix with row i selecting cluster assignments[i] (0-based).
Mat cluster_lift(const std::vector<int>& assignments, Index KC);

struct KernelPerturbation {
  double norm_gap = 0.0;
  double projector_gap = 0.0;
};

// Both kernels are estimated with the same seed, so identical inputs give an
// exact zero.
KernelPerturbation kernel_perturbation(const Mat& X_clean, const Mat& X_noisy,
                                       const Activation& act, Index r, int samples,
                                       std::uint64_t seed);

struct HadamardBounds {
  double lower = 0.0;
  double upper = 0.0;
};

// For PSD A, B: lambda_min(A .* B) >= min_i B_ii lambda_min(A) and
// lambda_max(A .* B) <= max_i B_ii lambda_max(A).
HadamardBounds hadamard_eigen_bounds(const Mat& A, const Mat& B);

}  // namespace ntks
