#pragma once

// Randomized inequality suites shared by the unit tests and the acceptance
// runner. Each suite counts instances and violations beyond a 1e-12 relative
// slack, and keeps a description of the first violation.

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "ntks/data.hpp"
#include "ntks/rng.hpp"
#include "ntks/shallownet.hpp"
#include "ntks/spectral.hpp"
#include "support.hpp"

namespace ntks::testing {

constexpr double kSuiteSlack = 1e-12;

struct SuiteResult {
  std::string name;
  long instances = 0;
  long violations = 0;
  std::string first_violation;

  // lhs <= rhs up to the relative slack.
  void expect_le(double lhs, double rhs, double scale, const std::string& what) {
    if (lhs <= rhs + kSuiteSlack * std::max(1.0, std::abs(scale))) return;
    if (violations++ == 0)
      first_violation = what + ": " + std::to_string(lhs) + " > " + std::to_string(rhs);
  }
};

// Early-stopping value B = ||J_I^+ r|| alpha + Gamma ||P_N r|| lies between
// (alpha / lambda_1) ||P_I r|| and Gamma ||r||.
inline SuiteResult early_stopping_suite(int instances) {
  SuiteResult out{"early stopping bounds"};
  for (int t = 0; t < instances; ++t, ++out.instances) {
    const Index m = 3 + t % 6;
    const auto d = svd(gaussian(m, m + 2, 2000 + t));
    const double alpha = d.singular_values(t % m) * (t % 3 == 0 ? 1.0 : 0.97);
    const auto s = split_at_cutoff(d, alpha);
    const Vec r0 = gaussian_vec(m, 5000 + t);
    const double gamma = 1.0 + (t % 7) * 0.5;
    const double b = early_stopping_value(s, r0, gamma);
    const double lower = alpha / d.singular_values(0) * project(s, r0, Subspace::Info).norm();
    out.expect_le(lower, b, b, "lower bound, instance " + std::to_string(t));
    out.expect_le(b, gamma * r0.norm(), b, "upper bound, instance " + std::to_string(t));
  }
  return out;
}

// lambda_min(A .* B) >= min_i B_ii lambda_min(A) and
// lambda_max(A .* B) <= max_i B_ii lambda_max(A) for PSD A, B.
inline SuiteResult hadamard_suite(int instances) {
  SuiteResult out{"Hadamard eigenvalue bounds"};
  for (int t = 0; t < instances; ++t, ++out.instances) {
    const Index n = 2 + t % 9;
    const Mat A = random_psd(n, 1 + t % (n + 2), 10 * t + 7);
    const Mat B = random_psd(n, 1 + (t / 3) % (n + 2), 10 * t + 8);
    Eigen::SelfAdjointEigenSolver<Mat> ea(A), eh(Mat(A.cwiseProduct(B)));
    const double scale = opnorm_ref(A) * B.diagonal().maxCoeff();
    out.expect_le(B.diagonal().minCoeff() * ea.eigenvalues().minCoeff(),
                  eh.eigenvalues().minCoeff(), scale, "lower, instance " + std::to_string(t));
    out.expect_le(eh.eigenvalues().maxCoeff(),
                  B.diagonal().maxCoeff() * ea.eigenvalues().maxCoeff(), scale,
                  "upper, instance " + std::to_string(t));
  }
  return out;
}

// ||I - eta A B^T|| <= 1 + eta eps^2 when ||A||, ||B|| <= beta,
// ||A - B|| <= eps and eta <= 1/beta^2.
inline SuiteResult asymmetric_increase_suite(int instances) {
  SuiteResult out{"asymmetric PSD increase"};
  Rng rng(1);
  for (int t = 0; t < instances; ++t, ++out.instances) {
    const Index m = 2 + t % 6, p = m + t % 5;
    const double beta = 0.5 + 2.0 * rng.uniform();
    Mat A = gaussian(m, p, 10 * t + 1);
    A *= beta * rng.uniform() / opnorm_ref(A);
    Mat E = gaussian(m, p, 10 * t + 2);
    E *= 0.3 * beta * rng.uniform() / opnorm_ref(E);
    Mat B = A + E;
    if (opnorm_ref(B) > beta) B *= beta / opnorm_ref(B);
    const double eps = opnorm_ref(B - A);
    const double eta = rng.uniform() / (beta * beta);
    const Mat step = Mat::Identity(m, m) - eta * A * B.transpose();
    const double bound = 1.0 + eta * eps * eps;
    out.expect_le(opnorm_ref(step), bound, bound, "operator norm, instance " + std::to_string(t));
    const Vec r = gaussian_vec(m, 10 * t + 3);
    out.expect_le((step * r).norm(), bound * r.norm(), r.norm(),
                  "vector growth, instance " + std::to_string(t));
  }
  return out;
}

// Y = B^{1/2} U_A V_A^T satisfies Y Y^T = B and ||Y - X|| <= 2 alpha when
// A = X X^T and ||A - B|| <= alpha^2. X is often rank deficient here.
inline SuiteResult psd_sqrt_suite(int instances) {
  SuiteResult out{"PSD square-root perturbation"};
  Rng rng(2);
  for (int t = 0; t < instances; ++t, ++out.instances) {
    const Index n = 2 + t % 7, p = n + t % 4;
    const Index rank = 1 + t % n;
    const Mat X = gaussian(n, rank, 10 * t + 4) * gaussian(rank, p, 10 * t + 5);
    const Mat A = X * X.transpose();
    const Mat Xb = X + 0.5 * rng.uniform() * gaussian(n, p, 10 * t + 6);
    const Mat B = Xb * Xb.transpose();
    const double alpha = std::sqrt(opnorm_ref(A - B));
    const Mat Y = square_root_partner(X, B);
    // Y Y^T = B is an identity up to eigensolver roundoff.
    out.expect_le(opnorm_ref(Y * Y.transpose() - B), 1e-10 * std::max(1.0, opnorm_ref(B)), 1.0,
                  "Y Y^T = B, instance " + std::to_string(t));
    out.expect_le(opnorm_ref(Y - X), 2.0 * alpha, alpha, "distance, instance " + std::to_string(t));
  }
  return out;
}

namespace detail {

struct JacobianCase {
  Mat X;
  ShallowNet net;
  double vinf = 0.0;
  double xnorm = 0.0;
};

inline JacobianCase jacobian_case(int t, std::uint64_t seed) {
  const Index n = 2 + t % 6, d = 2 + t % 5, K = 1 + t % 3, k = 3 + t % 11;
  JacobianCase c;
  c.X = unit_rows(gaussian(n, d, seed));
  c.net = random_net(k, d, K, seed + 1, t % 2 == 0 ? Activation::softplus() : Activation::tanh());
  c.vinf = c.net.V.cwiseAbs().maxCoeff();
  c.xnorm = opnorm_ref(c.X);
  return c;
}

}  // namespace detail

// For unit-norm inputs: ||J(W)|| <= B sqrt(K k) ||V||_inf ||X||.
inline SuiteResult jacobian_spectral_suite(int instances) {
  SuiteResult out{"Jacobian spectral bound"};
  for (int t = 0; t < instances; ++t, ++out.instances) {
    const auto c = detail::jacobian_case(t, 10 * t + 9);
    const double K = static_cast<double>(c.net.V.rows()), k = static_cast<double>(c.net.W.rows());
    const double bound = c.net.activation.B * std::sqrt(K * k) * c.vinf * c.xnorm;
    out.expect_le(opnorm_ref(jacobian_dense(c.net, c.X)), bound, bound,
                  "instance " + std::to_string(t));
  }
  return out;
}

// For unit u, every row of mat(J^T u) has norm <= B sqrt(K) ||V||_inf ||X||.
inline SuiteResult jacobian_row_suite(int instances) {
  SuiteResult out{"Jacobian row bound"};
  for (int t = 0; t < instances; ++t, ++out.instances) {
    const auto c = detail::jacobian_case(t, 10 * t + 11);
    Vec u = gaussian_vec(c.X.rows() * c.net.V.rows(), 10 * t + 13);
    u.normalize();
    const double bound =
        c.net.activation.B * std::sqrt(static_cast<double>(c.net.V.rows())) * c.vinf * c.xnorm;
    const Mat G = vjp(c.net, c.X, u);
    out.expect_le(G.rowwise().norm().maxCoeff(), bound, bound, "instance " + std::to_string(t));
  }
  return out;
}

// ||J(W~) - J(W)|| <= B sqrt(K) ||V||_inf ||X|| ||W~ - W||_F for unit-norm inputs.
inline SuiteResult jacobian_lipschitz_suite(int instances) {
  SuiteResult out{"Jacobian Lipschitz bound"};
  Rng rng(3);
  for (int t = 0; t < instances; ++t, ++out.instances) {
    const auto c = detail::jacobian_case(t, 10 * t + 14);
    ShallowNet moved = c.net;
    moved.W += (0.01 + 3.0 * rng.uniform()) * gaussian(c.net.W.rows(), c.net.W.cols(), 10 * t + 16);
    const double bound = c.net.activation.B * std::sqrt(static_cast<double>(c.net.V.rows())) *
                         c.vinf * c.xnorm * (moved.W - c.net.W).norm();
    out.expect_le(opnorm_ref(jacobian_dense(moved, c.X) - jacobian_dense(c.net, c.X)), bound,
                  bound, "instance " + std::to_string(t));
  }
  return out;
}

// With the output scale set to nu ||y|| / (50 B sqrt(log(2K) n)), the initial
// output obeys ||f(W_0)|| <= nu ||y||. This holds with high probability, so
// a violation here is a trial outside the bound.
inline SuiteResult initial_output_suite(int trials_per_setting) {
  SuiteResult out{"initial output bound"};
  struct Setting {
    Index n, d, K, k;
    double nu;
  };
  for (const Setting s : {Setting{20, 8, 2, 200, 1.0}, Setting{50, 16, 3, 500, 0.5},
                          Setting{10, 4, 1, 100, 0.1}}) {
    for (int t = 0; t < trials_per_setting; ++t, ++out.instances) {
      const std::uint64_t id = static_cast<std::uint64_t>(out.instances);
      const auto spec = make_mixture_spec(s.K, 1, s.d, 0.3, 0.0, s.n, 5000 + id);
      const auto ds = gen_gmm(spec, 6000 + id);
      const Mat X = normalize_rows(ds.X);
      const double y_norm = ds.concat_y.norm();
      const double scale = bounded_output_scale(s.nu, y_norm, 1.0, s.K, s.n);
      const auto net = init_random(s.k, s.d, s.K, scale, 7000 + id);
      out.expect_le(forward_concat(net, X).norm(), s.nu * y_norm, 0.0,
                    "n=" + std::to_string(s.n) + " trial " + std::to_string(t));
    }
  }
  return out;
}

}  // namespace ntks::testing
