#pragma once

// Independent reference computations shared by the test suites. Nothing here
// calls into the code paths it is used to check.

#include <cmath>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ntks/shallownet.hpp"

namespace ntks::testing {

inline Mat gaussian(Index rows, Index cols, std::uint64_t seed) {
  std::mt19937_64 eng(seed * 7919 + 13);
  std::normal_distribution<double> g(0.0, 1.0);
  Mat A(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) A(i, j) = g(eng);
  return A;
}

inline Vec gaussian_vec(Index n, std::uint64_t seed) { return gaussian(n, 1, seed).col(0); }

inline Mat unit_rows(Mat X) {
  for (Index i = 0; i < X.rows(); ++i) X.row(i).normalize();
  return X;
}

inline ShallowNet random_net(Index k, Index d, Index K, std::uint64_t seed,
                             Activation act = Activation::softplus(), double v_scale = 1.0) {
  ShallowNet net;
  net.W = gaussian(k, d, seed);
  net.V = v_scale * gaussian(K, k, seed + 1000003);
  net.activation = act;
  return net;
}

// Per-sample, per-class evaluation of V phi(W x_i), laid out per class.
inline Vec naive_forward(const ShallowNet& net, const Mat& X) {
  const Index n = X.rows(), K = net.V.rows(), k = net.W.rows();
  Vec out(n * K);
  for (Index i = 0; i < n; ++i) {
    for (Index l = 0; l < K; ++l) {
      double s = 0.0;
      for (Index h = 0; h < k; ++h) s += net.V(l, h) * net.activation.phi(net.W.row(h).dot(X.row(i)));
      out(l * n + i) = s;
    }
  }
  return out;
}

// Central differences of forward_concat in every entry of W (row-major order).
inline Mat fd_jacobian_W(const ShallowNet& net, const Mat& X, double h) {
  const Index k = net.W.rows(), d = net.W.cols();
  Mat J(X.rows() * net.V.rows(), k * d);
  for (Index s = 0; s < k; ++s) {
    for (Index j = 0; j < d; ++j) {
      ShallowNet p = net, m = net;
      p.W(s, j) += h;
      m.W(s, j) -= h;
      J.col(s * d + j) = (naive_forward(p, X) - naive_forward(m, X)) / (2.0 * h);
    }
  }
  return J;
}

// Central differences in every entry of V (row-major order).
inline Mat fd_jacobian_V(const ShallowNet& net, const Mat& X, double h) {
  const Index K = net.V.rows(), k = net.V.cols();
  Mat J(X.rows() * K, K * k);
  for (Index l = 0; l < K; ++l) {
    for (Index s = 0; s < k; ++s) {
      ShallowNet p = net, m = net;
      p.V(l, s) += h;
      m.V(l, s) -= h;
      J.col(l * k + s) = (naive_forward(p, X) - naive_forward(m, X)) / (2.0 * h);
    }
  }
  return J;
}

inline double rel_err(const Mat& a, const Mat& b) {
  const double scale = std::max(b.norm(), 1e-300);
  return (a - b).norm() / scale;
}

// Gauss-Hermite rule for E[f(g)], g ~ N(0, 1), from the Golub-Welsch
// eigenproblem of the Jacobi matrix of the physicists' Hermite polynomials.
inline std::vector<std::pair<double, double>> gauss_hermite_normal(int order) {
  Mat Jm = Mat::Zero(order, order);
  for (int i = 1; i < order; ++i) Jm(i, i - 1) = Jm(i - 1, i) = std::sqrt(i / 2.0);
  Eigen::SelfAdjointEigenSolver<Mat> es(Jm);
  std::vector<std::pair<double, double>> rule;
  for (int i = 0; i < order; ++i) {
    const double v0 = es.eigenvectors()(0, i);
    rule.emplace_back(std::sqrt(2.0) * es.eigenvalues()(i), v0 * v0);
  }
  return rule;
}

inline double opnorm_ref(const Mat& A) {
  Eigen::JacobiSVD<Mat> svd(A);
  return svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
}

inline Mat random_psd(Index n, Index rank, std::uint64_t seed) {
  const Mat B = gaussian(n, rank, seed);
  return B * B.transpose();
}

// Given X (n x p, p >= n) and PSD B, builds Y = B^{1/2} U_A V_A^T from the
// SVD X = U_A S V_A^T; then Y Y^T = B.
inline Mat square_root_partner(const Mat& X, const Mat& B) {
  Eigen::JacobiSVD<Mat> svd(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (B + B.transpose()));
  const Vec root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const Mat Bh = es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
  return Bh * svd.matrixU() * svd.matrixV().transpose();
}

}  // namespace ntks::testing
