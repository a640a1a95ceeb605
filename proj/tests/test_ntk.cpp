#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "ntks/cli/pipeline.hpp"
#include "ntks/errors.hpp"
#include "ntks/ntk.hpp"
#include "ntks/rng.hpp"
#include "support.hpp"

using namespace ntks;
using ntks::testing::gaussian;
using ntks::testing::opnorm_ref;
using ntks::testing::unit_rows;

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

Mat repeat_rows(const Mat& M, const std::vector<int>& assignments) {
  Mat X(static_cast<Index>(assignments.size()), M.cols());
  for (size_t i = 0; i < assignments.size(); ++i) X.row(i) = M.row(assignments[i]);
  return X;
}

double min_eig(const Mat& A) {
  return Eigen::SelfAdjointEigenSolver<Mat>(A, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
}

double max_eig(const Mat& A) {
  return Eigen::SelfAdjointEigenSolver<Mat>(A, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
}

}  // namespace

TEST(McKernel, IdentityActivationIsGram) {
  const Mat X = gaussian(7, 4, 1);
  const auto km = mc_kernel(X, Activation::identity(), 50, 2);
  EXPECT_LT((km.base - X * X.transpose()).norm(), 1e-12 * (X * X.transpose()).norm());
  EXPECT_LT(km.standard_error.norm(), 1e-12);
}

TEST(McKernel, ScalarMatchesGaussHermite) {
  double oracle = 0.0;
  for (const auto& [x, w] : ntks::testing::gauss_hermite_normal(80)) oracle += w * std::pow(sigmoid(x), 2);
  Mat x = Mat::Zero(1, 3);
  x(0, 1) = 1.0;
  const auto km = mc_kernel(x, Activation::softplus(), 100000, 3);
  EXPECT_LT(std::abs(km.base(0, 0) - oracle), 3.0 * km.standard_error(0, 0))
      << km.base(0, 0) << " vs " << oracle;
}

TEST(McKernel, StructuralInvariants) {
  for (const Activation act : {Activation::softplus(), Activation::tanh()}) {
    const Mat X = gaussian(12, 5, 4);
    const auto km = mc_kernel(X, act, 2000, 5);
    EXPECT_LT((km.base - km.base.transpose()).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_GE(min_eig(km.base), -1e-8 * km.base.trace() / 12.0);
    const double cap = act.B * act.B * X.rowwise().squaredNorm().maxCoeff();
    EXPECT_LE(km.base.diagonal().maxCoeff(), cap);
    EXPECT_EQ(km.mc_samples, 2000);
  }
}

TEST(McKernel, DeterministicAndThreadIndependent) {
  const Mat X = gaussian(9, 4, 6);
  const auto a = mc_kernel(X, Activation::softplus(), 5000, 7, 1, 1);
  const auto b = mc_kernel(X, Activation::softplus(), 5000, 7, 1, 1);
  const auto c = mc_kernel(X, Activation::softplus(), 5000, 7, 1, 3);
  EXPECT_EQ((a.base - b.base).norm(), 0.0);
  EXPECT_LT((a.base - c.base).norm(), 1e-12 * a.base.norm());
}

TEST(McKernel, IndependentSeedsAgreeWithinStandardErrors) {
  const Mat X = unit_rows(gaussian(6, 4, 8));
  int good = 0;
  const int trials = 20;
  for (int t = 0; t < trials; ++t) {
    const auto a = mc_kernel(X, Activation::softplus(), 4000, 100 + 2 * t);
    const auto b = mc_kernel(X, Activation::softplus(), 4000, 101 + 2 * t);
    const Mat combined = (a.standard_error.array().square() + b.standard_error.array().square()).sqrt();
    if (((a.base - b.base).array().abs() < 6.0 * combined.array()).all()) ++good;
  }
  EXPECT_GE(good, 19);
}

TEST(MulticlassKernel, KroneckerStructure) {
  KernelMatrix km;
  km.base = Mat::Zero(2, 2);
  km.base(0, 0) = 2.0;
  km.base(1, 1) = 5.0;
  km.num_classes = 1;
  EXPECT_EQ((multiclass_kernel(km) - km.base).norm(), 0.0);
  km.num_classes = 2;
  const Mat M = multiclass_kernel(km);
  EXPECT_EQ(M.diagonal(), Vec((Vec(4) << 2.0, 5.0, 2.0, 5.0).finished()));
  EXPECT_EQ(M.norm(), M.diagonal().norm());

  const Mat X = gaussian(5, 3, 9);
  auto big = mc_kernel(X, Activation::softplus(), 500, 10, 3);
  const Mat K3 = multiclass_kernel(big);
  for (Index l = 0; l < 3; ++l)
    for (Index m = 0; m < 3; ++m) {
      if (l == m) EXPECT_EQ((K3.block(l * 5, m * 5, 5, 5) - big.base).norm(), 0.0);
      else EXPECT_EQ(K3.block(l * 5, m * 5, 5, 5).norm(), 0.0);
    }
}

TEST(MulticlassKernel, SquareRoot) {
  const Mat X = gaussian(6, 3, 11);
  const auto km = mc_kernel(X, Activation::softplus(), 2000, 12, 2);
  const Mat R = multiclass_kernel_sqrt(km);
  const Mat M = multiclass_kernel(km);
  EXPECT_LT(opnorm_ref(R * R - M), 1e-8 * opnorm_ref(M));
}

TEST(ClampPsd, RejectsIndefinite) {
  Mat A = Mat::Identity(3, 3);
  A(2, 2) = -0.5;
  EXPECT_THROW(clamp_psd(A), Error);
  Mat tiny = Mat::Identity(3, 3);
  tiny(2, 2) = -1e-12;
  EXPECT_GE(min_eig(clamp_psd(tiny)), 0.0);
}

TEST(EmpiricalKernel, MatchesDenseJacobianGram) {
  for (const Activation act : {Activation::softplus(), Activation::tanh()}) {
    const auto net = ntks::testing::random_net(15, 4, 3, 13, act);
    const Mat X = gaussian(6, 4, 14);
    const Mat J = jacobian_dense(net, X);
    const Mat dense = J * J.transpose();
    const Mat got = empirical_kernel(net, X);
    EXPECT_LT((got - dense).norm() / dense.norm(), 1e-9);
    EXPECT_GE(min_eig(got), -1e-9 * dense.norm());
  }
}

TEST(EmpiricalKernel, IdentityDiagonalBlocks) {
  const auto net = ntks::testing::random_net(8, 3, 2, 15, Activation::identity());
  const Mat X = gaussian(5, 3, 16);
  const Mat C = empirical_kernel(net, X);
  for (Index l = 0; l < 2; ++l) {
    const Mat expected = net.V.row(l).squaredNorm() * X * X.transpose();
    EXPECT_LT((C.block(l * 5, l * 5, 5, 5) - expected).norm(), 1e-12 * expected.norm());
  }
}

TEST(EmpiricalKernel, JacobianGramAgreesWithEmpiricalKernel) {
  const auto net = ntks::testing::random_net(9, 4, 2, 17);
  const Mat X = gaussian(5, 4, 18);
  const Mat D = activation_derivatives(net, X);
  EXPECT_LT((jacobian_gram(net.V, D, X) - empirical_kernel(net, X)).norm(), 1e-12);
}

TEST(EmpiricalKernel, ClassBlocksDecorrelateOnAverage) {
  const Index n = 8, d = 5, K = 2, k = 50;
  const double nu = 1.0;
  const Mat X = unit_rows(gaussian(n, d, 19));
  std::uint64_t next_seed = 1000;
  // Mean squared off-diagonal block entry of the average over `trials` nets,
  // pooled over independent replicate groups.
  auto off_block_ms = [&](int trials, int groups) {
    double ms = 0.0, diag = 0.0;
    for (int g = 0; g < groups; ++g) {
      Mat sum = Mat::Zero(K * n, K * n);
      for (int t = 0; t < trials; ++t)
        sum += (K / (nu * nu)) * empirical_kernel(init_random(k, d, K, nu, next_seed++), X);
      sum /= trials;
      ms += sum.block(0, n, n, n).squaredNorm() / (n * n);
      diag = std::max(diag, sum.block(0, 0, n, n).diagonal().maxCoeff());
    }
    return std::make_pair(ms / groups, diag);
  };
  const double ms_small = off_block_ms(25, 8).first;
  const auto [ms_large, diag_large] = off_block_ms(400, 8);
  // One net's off-diagonal entry has standard deviation <= max diag / sqrt(k).
  EXPECT_LT(std::sqrt(ms_large), 3.0 * diag_large / std::sqrt(400.0 * k));
  // 16x more trials: the rms should drop by about 4.
  const double ratio = std::sqrt(ms_small / ms_large);
  EXPECT_GT(ratio, 2.5);
  EXPECT_LT(ratio, 6.5);
}

TEST(ConcentrationGap, IdentityActivationIsExact) {
  const Mat X = unit_rows(gaussian(6, 4, 20));
  const auto net = init_random(30, 4, 1, 0.7, 21, Activation::identity());
  const auto km = mc_kernel(X, Activation::identity(), 100, 22, 1);
  EXPECT_LT(concentration_gap(net, X, km, 0.7), 1e-12 + 3.0 * kernel_error_scale(km));
}

TEST(ConcentrationGap, SingleNeuronIdentity) {
  const Mat X = unit_rows(gaussian(4, 3, 23));
  ShallowNet net;
  net.W = gaussian(1, 3, 24);
  net.V = Mat::Constant(1, 1, 0.3);
  net.activation = Activation::identity();
  const auto km = mc_kernel(X, Activation::identity(), 10, 25, 1);
  EXPECT_LT(concentration_gap(net, X, km, 0.3), 1e-12);
}

TEST(ConcentrationGap, ShrinksWithWidth) {
  const Mat X = unit_rows(gaussian(30, 6, 26));
  const auto km = mc_kernel(X, Activation::softplus(), 50000, 27, 2);
  std::vector<double> narrow, wide;
  for (int t = 0; t < 20; ++t) {
    narrow.push_back(concentration_gap(init_random(100, 6, 2, 1.0, 300 + t), X, km, 1.0));
    wide.push_back(concentration_gap(init_random(1600, 6, 2, 1.0, 300 + t), X, km, 1.0));
  }
  EXPECT_LT(ntks::cli::median(wide), ntks::cli::median(narrow));
}

TEST(ClusterLift, Examples) {
  EXPECT_EQ(cluster_lift({0, 0, 0}, 1), Mat::Ones(3, 1));
  const Mat U = cluster_lift({0, 1, 0, 1}, 2);
  EXPECT_EQ(U.transpose() * U, 2.0 * Mat::Identity(2, 2));
  EXPECT_THROW(cluster_lift({0, 2}, 2), Error);
  EXPECT_THROW(cluster_lift({-1}, 2), Error);
}

TEST(ClusterLift, StructureOnRandomAssignments) {
  Rng rng(28);
  std::vector<int> a(40);
  for (auto& c : a) c = rng.uniform_int(0, 4);
  const Mat U = cluster_lift(a, 5);
  for (Index i = 0; i < 40; ++i) {
    EXPECT_EQ(U.row(i).sum(), 1.0);
    EXPECT_EQ(U(i, a[i]), 1.0);
  }
  const Mat G = U.transpose() * U;
  for (Index c = 0; c < 5; ++c) {
    EXPECT_EQ(G(c, c), static_cast<double>(std::count(a.begin(), a.end(), static_cast<int>(c))));
    for (Index e = 0; e < 5; ++e)
      if (e != c) EXPECT_EQ(G(c, e), 0.0);
  }
}

TEST(ClusterLift, NoiselessMixtureKernelFactorizes) {
  const Mat M = unit_rows(gaussian(4, 6, 29));
  const std::vector<int> a = {0, 1, 2, 3, 0, 1, 2, 3, 2, 2};
  const Mat X = repeat_rows(M, a);
  const Mat U = cluster_lift(a, 4);
  const auto kx = mc_kernel(X, Activation::softplus(), 20000, 30);
  const auto km = mc_kernel(M, Activation::softplus(), 20000, 30);
  const Mat lifted = U * km.base * U.transpose();
  EXPECT_TRUE(((kx.base - lifted).array().abs() <= 3.0 * kx.standard_error.array() + 1e-14).all());
}

TEST(KernelPerturbation, IdenticalInputs) {
  const Mat X = gaussian(8, 4, 31);
  const auto p = kernel_perturbation(X, X, Activation::softplus(), 3, 2000, 32);
  EXPECT_EQ(p.norm_gap, 0.0);
  EXPECT_LT(p.projector_gap, 1e-10);
}

TEST(KernelPerturbation, NormGapGrowsWithNoise) {
  const Mat M = unit_rows(gaussian(3, 8, 33));
  const std::vector<int> a = {0, 1, 2, 0, 1, 2, 0, 1, 2, 0, 1, 2};
  const Mat X = repeat_rows(M, a);
  std::vector<double> medians;
  for (double sigma : {0.0, 0.05, 0.1, 0.2}) {
    std::vector<double> gaps;
    for (int s = 0; s < 10; ++s) {
      const Mat Xn = X + sigma / std::sqrt(8.0) * gaussian(12, 8, 500 + s);
      gaps.push_back(kernel_perturbation(X, Xn, Activation::softplus(), 3, 5000, 34).norm_gap);
    }
    medians.push_back(ntks::cli::median(gaps));
  }
  for (size_t i = 1; i < medians.size(); ++i) EXPECT_GE(medians[i], medians[i - 1]);
}

TEST(KernelPerturbation, DavisKahanBoundOnRankDeficientKernels) {
  int checked = 0;
  for (int s = 0; s < 20; ++s) {
    const Mat M = unit_rows(gaussian(3, 8, 600 + s));
    const std::vector<int> a = {0, 1, 2, 0, 1, 2, 0, 1, 2};
    const Mat X = repeat_rows(M, a);
    const Mat Xn = X + 0.02 * gaussian(9, 8, 700 + s);
    const auto p = kernel_perturbation(X, Xn, Activation::softplus(), 3, 5000, 35);
    const auto clean = mc_kernel(X, Activation::softplus(), 5000, 35);
    Vec lam;
    symmetric_eigen(clean.base, lam);
    const double lam_r = lam(lam.size() - 3);
    if (lam_r <= p.norm_gap) continue;
    ++checked;
    EXPECT_LE(p.projector_gap, p.norm_gap / (lam_r - p.norm_gap) + 1e-12) << s;
  }
  EXPECT_GE(checked, 10);
}

TEST(HadamardBounds, SchurProductEigenvalues) {
  for (int t = 0; t < 200; ++t) {
    const Index n = 3 + t % 8;
    const Mat A = ntks::testing::random_psd(n, n + 2, 800 + t);
    const Mat B = ntks::testing::random_psd(n, 1 + t % n, 900 + t);
    const auto b = hadamard_eigen_bounds(A, B);
    const Mat H = A.cwiseProduct(B);
    const double scale = A.norm() * B.norm();
    EXPECT_GE(min_eig(H), b.lower - 1e-12 * scale);
    EXPECT_LE(max_eig(H), b.upper + 1e-12 * scale);
    EXPECT_NEAR(b.upper, B.diagonal().maxCoeff() * max_eig(A), 1e-12 * scale);
  }
}
