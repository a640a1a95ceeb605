#include <gtest/gtest.h>

#include <cmath>

#include "ntks/errors.hpp"
#include "ntks/lindyn.hpp"
#include "ntks/rng.hpp"
#include "support.hpp"

using namespace ntks;
using ntks::testing::gaussian;
using ntks::testing::gaussian_vec;
using ntks::testing::opnorm_ref;
using ntks::testing::unit_rows;

namespace {

struct Instance {
  Mat J;
  SpectralDecomposition d;
  Vec r0;
  double eta;
};

Instance random_instance(Index m, Index p, std::uint64_t seed, double eta_fraction = 0.9) {
  Instance in;
  in.J = gaussian(m, p, seed);
  in.d = svd(in.J);
  in.r0 = gaussian_vec(m, seed + 77);
  in.eta = eta_fraction / std::pow(in.d.singular_values(0), 2);
  return in;
}

Mat padded(const Mat& J) {
  Mat P = Mat::Zero(J.rows(), std::max(J.rows(), J.cols()));
  P.leftCols(J.cols()) = J;
  return P;
}

}  // namespace

TEST(LinearizedResidual, Examples) {
  const auto in = random_instance(5, 8, 1);
  EXPECT_LT((linearized_residual(in.d, in.r0, in.eta, 0) - in.r0).norm(), 1e-13);
  const auto one = svd(Mat::Ones(1, 1));
  EXPECT_NEAR(linearized_residual(one, Vec::Constant(1, 3.0), 1.0, 1)(0), 0.0, 1e-15);
}

TEST(LinearizedResidual, MatchesRepeatedMultiplication) {
  for (int trial = 0; trial < 10; ++trial) {
    const auto in = random_instance(4 + trial % 4, 3 + trial % 7, 10 + trial);
    const Mat P = padded(in.J);
    const Mat step = Mat::Identity(in.J.rows(), in.J.rows()) - in.eta * P * P.transpose();
    Vec r = in.r0;
    for (int tau = 0; tau <= 50; ++tau) {
      EXPECT_LT((linearized_residual(in.d, in.r0, in.eta, tau) - r).norm(), 1e-10 * in.r0.norm());
      r = step * r;
    }
  }
}

TEST(LinearizedResidual, RejectsLargeStep) {
  const auto in = random_instance(4, 6, 2);
  const double big = 1.5 / std::pow(in.d.singular_values(0), 2);
  EXPECT_THROW(linearized_residual(in.d, in.r0, big, 3), Error);
}

TEST(LinearizedParamOffset, Examples) {
  const auto in = random_instance(5, 8, 3);
  EXPECT_EQ(linearized_param_offset(in.d, in.r0, in.eta, 0).norm(), 0.0);
  const Vec one_step = -in.eta * padded(in.J).transpose() * in.r0;
  EXPECT_LT((linearized_param_offset(in.d, in.r0, in.eta, 1) - one_step).norm(), 1e-12 * one_step.norm());
}

TEST(LinearizedParamOffset, MatchesExplicitLinearizedGd) {
  for (int trial = 0; trial < 10; ++trial) {
    const auto in = random_instance(3 + trial % 5, 2 + trial % 9, 20 + trial);
    const Mat P = padded(in.J);
    // Linearized loss 1/2 ||r0 + P theta||^2 from theta = 0.
    Vec theta = Vec::Zero(P.cols());
    for (int tau = 0; tau <= 100; ++tau) {
      const Vec got = linearized_param_offset(in.d, in.r0, in.eta, tau);
      EXPECT_LT((got - theta).norm(), 1e-10 * std::max(1.0, theta.norm())) << trial << " " << tau;
      const Vec res = in.r0 + P * theta;
      EXPECT_LT((linearized_residual(in.d, in.r0, in.eta, tau) - res).norm(), 1e-10 * in.r0.norm());
      theta -= in.eta * P.transpose() * res;
    }
  }
}

TEST(LinearizedParamOffset, TinySingularValuesAreStable) {
  Mat J = Mat::Zero(3, 3);
  J(0, 0) = 1.0;
  J(1, 1) = 1e-9;
  const auto d = svd(J);
  const Vec r0 = Vec::Ones(3);
  const Vec off = linearized_param_offset(d, r0, 0.5, 1000);
  // Component along e_2 is -a tau eta lambda to first order; e_3 (lambda = 0) is exactly zero.
  EXPECT_NEAR(off(1), -1000 * 0.5 * 1e-9, 1e-15);
  EXPECT_EQ(off(2), 0.0);
  EXPECT_TRUE(off.allFinite());
}

TEST(LinearizedParamOffset, SquaredNormBound) {
  for (int trial = 0; trial < 200; ++trial) {
    const auto in = random_instance(4 + trial % 5, 5 + trial % 6, 100 + trial);
    const Index m = in.d.rows();
    const int tau = 1 + trial % 60;
    const Vec a = in.d.left_vectors.transpose() * in.r0;
    const double sq = linearized_param_offset(in.d, in.r0, in.eta, tau).squaredNorm();
    for (Index r = 0; r <= m; ++r) {
      double bound = 0.0;
      for (Index s = 0; s < m; ++s) {
        const double lam = in.d.singular_values(s);
        bound += s < r ? a(s) * a(s) / (lam * lam)
                       : double(tau) * tau * in.eta * in.eta * lam * lam * a(s) * a(s);
      }
      EXPECT_LE(sq, bound * (1 + 1e-12) + 1e-12) << trial << " r=" << r;
    }
  }
}

TEST(LinearizedResidual, SubspaceMonotonicity) {
  for (int trial = 0; trial < 100; ++trial) {
    const auto in = random_instance(6, 9, 300 + trial, 1.0);
    const auto split = split_at_cutoff(in.d, in.d.singular_values(trial % 6));
    const double alpha = split.cutoff;
    const double pi0 = project(split, in.r0, Subspace::Info).norm();
    const double pn0 = project(split, in.r0, Subspace::Nuisance).norm();
    for (int tau = 0; tau <= 40; tau += 5) {
      const Vec r = linearized_residual(in.d, in.r0, in.eta, tau);
      EXPECT_LE(project(split, r, Subspace::Info).norm(),
                std::pow(1 - in.eta * alpha * alpha, tau) * pi0 + 1e-12);
      EXPECT_LE(project(split, r, Subspace::Nuisance).norm(), pn0 + 1e-12);
    }
  }
}

TEST(ReferenceJacobian, PaddingAndBeta) {
  const Mat J = gaussian(6, 3, 4);
  const auto ref = make_reference(J, opnorm_ref(J));
  EXPECT_EQ(ref.matrix.cols(), 6);
  EXPECT_EQ(ref.matrix.rightCols(3).norm(), 0.0);
  EXPECT_THROW(make_reference(J, 0.5 * opnorm_ref(J)), Error);
}

TEST(ReferenceEpsilon, Examples) {
  const Mat J0 = gaussian(4, 7, 5);
  EXPECT_LT(reference_epsilon(make_reference(J0, opnorm_ref(J0)), J0), 1e-7);
  const auto scalar = make_reference(Mat::Constant(1, 1, 2.0), 2.0);
  EXPECT_NEAR(reference_epsilon(scalar, Mat::Ones(1, 1)), std::sqrt(3.0), 1e-14);
}

TEST(ReferenceEpsilon, GramSquareRootReference) {
  const Mat J0 = gaussian(5, 3, 6);
  const Mat root = psd_sqrt(J0 * J0.transpose());
  const auto ref = make_reference(root, opnorm_ref(root) * (1 + 1e-12));
  const double direct = opnorm_ref(padded(J0) - ref.matrix);
  // The Gram term vanishes, so epsilon is the direct distance.
  EXPECT_NEAR(reference_epsilon(ref, J0), direct, 1e-8 * direct);
}

TEST(LipschitzProbe, Examples) {
  const Mat X = unit_rows(gaussian(6, 4, 7));
  const auto net = init_random(40, 4, 2, 1.0, 8);
  EXPECT_EQ(lipschitz_probe(net, X, 0.0, 10, 9), 0.0);
  const auto lin = init_random(40, 4, 2, 1.0, 8, Activation::identity());
  EXPECT_LT(lipschitz_probe(lin, X, 3.0, 10, 9), 1e-12);
}

TEST(LipschitzProbe, BelowJacobianLipschitzBound) {
  for (int t = 0; t < 50; ++t) {
    const Index n = 4 + t % 5, d = 3 + t % 4, K = 1 + t % 3, k = 10 + 5 * t;
    const Mat X = unit_rows(gaussian(n, d, 1000 + t));
    const auto net = init_random(k, d, K, 1.0 + 0.1 * t, 2000 + t);
    const double radius = 0.1 + 0.05 * t;
    const double bound = net.activation.B * std::sqrt(double(K)) * net.V.cwiseAbs().maxCoeff() *
                         opnorm_ref(X) * radius;
    EXPECT_LE(lipschitz_probe(net, X, radius, 8, 3000 + t), bound + 1e-12) << t;
  }
}

TEST(StoppingTime, Ceil) {
  EXPECT_EQ(stopping_time(2.0, 0.5, 1.0), 4);
  EXPECT_EQ(stopping_time(1.0, 0.3, 1.0), 4);
}

TEST(CoupledRun, LinearModelIsItsOwnLinearization) {
  // n < d keeps X X^T, and so J J^T = (V V^T) (x) X X^T, nonsingular.
  const Mat X = unit_rows(gaussian(4, 6, 10));
  const auto net = init_random(12, 6, 2, 1.0, 11, Activation::identity());
  const Vec y = gaussian_vec(8, 12);
  const Mat J = jacobian_dense(net, X);
  const auto ref = make_reference(J, opnorm_ref(J));
  const auto& lam = ref.decomposition->singular_values;
  const double alpha = lam(lam.size() - 1);
  const double eta = 1.0 / (ref.beta * ref.beta);
  CoupledOptions opts;
  opts.probes = 4;
  const auto run = coupled_run(net, X, y, ref, alpha, 2.0, eta, 0.1, opts);
  const double r0 = run.report.r0_norm;
  ASSERT_EQ(run.records.back().iter, run.report.T);
  for (const auto& rec : run.records) {
    EXPECT_LT(rec.coupling_gap, 1e-10 * r0);
    EXPECT_LT(rec.param_gap, 1e-10 * r0 / alpha);
    EXPECT_LT(rec.jacobian_drift, 1e-10);
    EXPECT_LE(rec.residual, rec.linear_residual + rec.coupling_gap + 1e-14 * r0);
  }
  EXPECT_TRUE(run.report.all_hold());
  EXPECT_EQ(run.report.T, stopping_time(2.0, eta, alpha));
}

TEST(CoupledRun, WideSoftplusNetFinalResidualHolds) {
  const Mat X = unit_rows(gaussian(8, 5, 13));
  const Vec y = gaussian_vec(8, 14);
  const auto net = init_random(3000, 5, 1, 1.0, 15);
  const Mat J = jacobian_dense(net, X);
  const auto ref = make_reference(J, opnorm_ref(J));
  const auto& lam = ref.decomposition->singular_values;
  const double alpha = lam(gap_rank(lam, 7) - 1);
  const double eta = 1.0 / (ref.beta * ref.beta);
  const auto run = coupled_run(net, X, y, ref, alpha, 2.0, eta, 0.1);
  EXPECT_TRUE(run.report.final_residual.holds);
  EXPECT_GT(run.report.final_residual.slack, 0.0);
  for (const auto& rec : run.records)
    EXPECT_LE(rec.residual, rec.linear_residual + rec.coupling_gap + 1e-12);
}

TEST(CoupledRun, FullSpaceCutoffDrivesResidualDown) {
  const Mat X = unit_rows(gaussian(5, 4, 16));
  const Vec y = gaussian_vec(5, 17);
  const auto net = init_random(2000, 4, 1, 1.0, 18);
  const Mat J = jacobian_dense(net, X);
  const auto ref = make_reference(J, opnorm_ref(J));
  const auto& lam = ref.decomposition->singular_values;
  const double alpha = lam(lam.size() - 1);
  const double eta = 1.0 / (ref.beta * ref.beta);
  const auto run = coupled_run(net, X, y, ref, alpha, 5.0, eta, 0.1);
  EXPECT_EQ(run.report.rank, 5);
  EXPECT_LT(run.records.back().residual, 0.01 * run.report.r0_norm);
}

TEST(CoupledRun, RejectsLargeStep) {
  const Mat X = unit_rows(gaussian(4, 3, 19));
  const auto net = init_random(20, 3, 1, 1.0, 20);
  const Mat J = jacobian_dense(net, X);
  const auto ref = make_reference(J, opnorm_ref(J));
  try {
    coupled_run(net, X, Vec::Ones(4), ref, ref.decomposition->singular_values(0), 2.0,
                2.0 / (ref.beta * ref.beta), 0.1);
    FAIL() << "expected a step-size error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::StepSize);
  }
}

TEST(ScalarGrowth, RandomHypothesesHold) {
  Rng rng(21);
  int checked = 0;
  for (int t = 0; t < 1000; ++t) {
    const double gamma = 1.0 + 4.0 * rng.uniform();
    const double alpha = 0.2 + 2.0 * rng.uniform();
    const double eps = alpha / std::sqrt(2.0 * gamma) * rng.uniform();
    const double eta = (0.05 + 0.95 * rng.uniform()) / (alpha * alpha);
    const double rho_plus = 3.0 * rng.uniform(), rho_minus = 3.0 * rng.uniform();
    const double theta = 2.0 * rng.uniform();
    const auto g = scalar_growth_check(gamma, alpha, eps, eta, rho_plus, rho_minus, theta);
    EXPECT_TRUE(g.holds) << t << ": " << g.max_e << " > " << g.bound;
    EXPECT_LE(g.max_e, g.bound + 1e-12);
    ++checked;
  }
  EXPECT_EQ(checked, 1000);
}

TEST(ScalarGrowth, RejectsViolatedHypotheses) {
  EXPECT_THROW(scalar_growth_check(2.0, 1.0, 1.0, 0.5, 1.0, 1.0, 1.0), Error);
  EXPECT_THROW(scalar_growth_check(2.0, 1.0, 0.1, 2.0, 1.0, 1.0, 1.0), Error);
}
