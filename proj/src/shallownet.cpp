#include "ntks/shallownet.hpp"

#include <algorithm>
#include <cmath>

#include "ntks/rng.hpp"

namespace ntks {

Activation Activation::parse(const std::string& name) {
  if (name == "softplus") return softplus();
  if (name == "identity") return identity();
  if (name == "tanh") return tanh();
  fail(ErrorCode::InvalidArgument, "unknown activation '" + name + "'");
}

std::string Activation::name() const {
  switch (kind) {
    case ActivationKind::Softplus: return "softplus";
    case ActivationKind::Identity: return "identity";
    case ActivationKind::Tanh: return "tanh";
  }
  return "unknown";
}

namespace {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

double Activation::phi(double z) const {
  switch (kind) {
    case ActivationKind::Softplus:
      return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
    case ActivationKind::Identity: return z;
    case ActivationKind::Tanh: return std::tanh(z);
  }
  return 0.0;
}

double Activation::dphi(double z) const {
  switch (kind) {
    case ActivationKind::Softplus: return sigmoid(z);
    case ActivationKind::Identity: return 1.0;
    case ActivationKind::Tanh: {
      const double t = std::tanh(z);
      return 1.0 - t * t;
    }
  }
  return 0.0;
}

double Activation::ddphi(double z) const {
  switch (kind) {
    case ActivationKind::Softplus: {
      const double s = sigmoid(z);
      return s * (1.0 - s);
    }
    case ActivationKind::Identity: return 0.0;
    case ActivationKind::Tanh: {
      const double t = std::tanh(z);
      return -2.0 * t * (1.0 - t * t);
    }
  }
  return 0.0;
}

namespace {

void check_input(const ShallowNet& net, const Mat& X) {
  require(net.V.cols() == net.W.rows(), ErrorCode::DimensionMismatch,
          "V must have k columns");
  require(X.cols() == net.d(), ErrorCode::DimensionMismatch,
          "input dimension " + std::to_string(X.cols()) + " != " + std::to_string(net.d()));
}

Vec concat_rows(const Mat& F) {
  // F is K x n; the per-class layout is the row-major flattening
  const Mat Ft = F.transpose();
  return Eigen::Map<const Vec>(Ft.data(), Ft.size());
}

Mat unconcat(const Vec& u, Index n, Index K) {
  // inverse of concat_rows: K x n
  Mat Ut = Eigen::Map<const Mat>(u.data(), n, K);
  return Ut.transpose();
}

Mat apply(const Mat& Z, const Activation& act, int order) {
  Mat out(Z.rows(), Z.cols());
  for (Index j = 0; j < Z.cols(); ++j)
    for (Index i = 0; i < Z.rows(); ++i) {
      const double z = Z(i, j);
      out(i, j) = order == 0 ? act.phi(z) : order == 1 ? act.dphi(z) : act.ddphi(z);
    }
  return out;
}

}  // namespace

Mat forward_matrix(const ShallowNet& net, const Mat& X) {
  check_input(net, X);
  const Mat H = apply(net.W * X.transpose(), net.activation, 0);  // k x n
  return net.V * H;
}

Vec forward_concat(const ShallowNet& net, const Mat& X) {
  return concat_rows(forward_matrix(net, X));
}

Mat activation_derivatives(const ShallowNet& net, const Mat& X) {
  check_input(net, X);
  return apply(X * net.W.transpose(), net.activation, 1);
}

Mat jacobian_dense(const ShallowNet& net, const Mat& X) {
  const Mat D = activation_derivatives(net, X);  // n x k
  const Index n = X.rows(), d = net.d(), k = net.k(), K = net.K();
  Mat J(K * n, k * d);
  for (Index l = 0; l < K; ++l)
    for (Index i = 0; i < n; ++i)
      for (Index s = 0; s < k; ++s)
        J.row(l * n + i).segment(s * d, d) = (net.V(l, s) * D(i, s)) * X.row(i);
  return J;
}

Mat vjp(const ShallowNet& net, const Mat& X, const Vec& u) {
  const Index n = X.rows(), K = net.K();
  require(u.size() == n * K, ErrorCode::DimensionMismatch, "vjp vector length");
  const Mat D = activation_derivatives(net, X);  // n x k
  const Mat Uc = unconcat(u, n, K);              // K x n
  const Mat M = D.transpose().cwiseProduct(net.V.transpose() * Uc);  // k x n
  return M * X;
}

Vec jvp(const ShallowNet& net, const Mat& X, const Mat& dW) {
  require(dW.rows() == net.k() && dW.cols() == net.d(), ErrorCode::DimensionMismatch,
          "jvp direction shape");
  const Mat D = activation_derivatives(net, X);
  const Mat P = (dW * X.transpose()).cwiseProduct(D.transpose());  // k x n
  return concat_rows(net.V * P);
}

Mat output_jacobian(const ShallowNet& net, const Mat& X) {
  check_input(net, X);
  const Index n = X.rows(), k = net.k(), K = net.K();
  const Mat H = apply(X * net.W.transpose(), net.activation, 0);  // n x k
  Mat J = Mat::Zero(K * n, K * k);
  for (Index l = 0; l < K; ++l) J.block(l * n, l * k, n, k) = H;
  return J;
}

Mat combined_jacobian(const ShallowNet& net, const Mat& X) {
  const Mat JV = output_jacobian(net, X);
  const Mat JW = jacobian_dense(net, X);
  Mat J(JV.rows(), JV.cols() + JW.cols());
  J << JV, JW;
  return J;
}

double loss(const ShallowNet& net, const Mat& X, const Vec& y) {
  require(y.size() == X.rows() * net.K(), ErrorCode::DimensionMismatch, "label vector length");
  return 0.5 * (forward_concat(net, X) - y).squaredNorm();
}

ShallowNet gd_step(const ShallowNet& net, const Mat& X, const Vec& y, double eta) {
  require(eta >= 0.0 && std::isfinite(eta), ErrorCode::InvalidArgument, "step size must be >= 0");
  require(y.size() == X.rows() * net.K(), ErrorCode::DimensionMismatch, "label vector length");
  const Mat G = vjp(net, X, forward_concat(net, X) - y);
  require(G.allFinite(), ErrorCode::NonFinite, "gradient");
  ShallowNet next = net;
  next.W -= eta * G;
  return next;
}

double max_row_norm(const Mat& A) {
  if (A.rows() == 0) return 0.0;
  return A.rowwise().norm().maxCoeff();
}

std::pair<ShallowNet, TrajectoryLog> train(const ShallowNet& net, const Mat& X, const Vec& y,
                                           double eta, int T, const TrainOptions& opts) {
  require(T >= 0, ErrorCode::InvalidArgument, "T must be >= 0");
  require(opts.stride >= 1, ErrorCode::InvalidArgument, "stride must be >= 1");
  require(eta >= 0.0 && std::isfinite(eta), ErrorCode::InvalidArgument, "step size must be >= 0");
  require(y.size() == X.rows() * net.K(), ErrorCode::DimensionMismatch, "label vector length");
  if (opts.split != nullptr)
    require(opts.split->info_basis.rows() == y.size(), ErrorCode::DimensionMismatch,
            "split dimension");

  ShallowNet cur = net;
  TrajectoryLog log;
  double r0_norm = 0.0;
  for (int tau = 0;; ++tau) {
    const Vec r = forward_concat(cur, X) - y;
    const double rn = r.norm();
    if (tau == 0) r0_norm = rn;
    const bool diverged = !std::isfinite(rn) || rn > 1e8 * r0_norm;
    if (tau % opts.stride == 0 || tau == T || diverged) {
      TrajectoryRecord rec;
      rec.iter = tau;
      rec.residual_norm = rn;
      rec.loss = 0.5 * r.squaredNorm();
      const Mat dW = cur.W - net.W;
      rec.dist_fro = dW.norm();
      rec.dist_2inf = max_row_norm(dW);
      if (opts.split != nullptr && std::isfinite(rn)) {
        rec.proj_info = (opts.split->info_basis.transpose() * r).norm();
        rec.proj_nuisance = (opts.split->nuisance_basis.transpose() * r).norm();
      }
      if (opts.heldout_error) rec.heldout_error = opts.heldout_error(cur);
      log.records.push_back(rec);
      for (const auto& obs : opts.observers) obs(tau, cur, r);
    }
    if (diverged)
      throw DivergenceError("residual norm exceeded 1e8 * ||r_0|| at iteration " +
                                std::to_string(tau),
                            std::move(log));
    if (tau == T) break;
    const Mat G = vjp(cur, X, r);
    require(G.allFinite(), ErrorCode::NonFinite, "gradient at iteration " + std::to_string(tau));
    cur.W -= eta * G;
  }
  return {cur, log};
}

ShallowNet init_random(Index k, Index d, Index K, double nu, std::uint64_t seed, Activation act) {
  require(nu > 0.0 && std::isfinite(nu), ErrorCode::InvalidArgument, "nu must be > 0");
  require(k > 0 && d > 0 && K > 0, ErrorCode::InvalidArgument, "network dimensions must be > 0");
  Rng rng(seed);
  ShallowNet net;
  net.activation = act;
  net.W = rng.normal_matrix(k, d);
  const double mag = nu / std::sqrt(static_cast<double>(k) * static_cast<double>(K));
  net.V.resize(K, k);
  for (Index l = 0; l < K; ++l)
    for (Index s = 0; s < k; ++s) net.V(l, s) = mag * rng.rademacher();
  return net;
}

double bounded_output_scale(double nu, double y_norm, double B, Index K, Index n) {
  require(K >= 1 && n >= 1 && B > 0.0, ErrorCode::InvalidArgument, "scale arguments");
  return nu * y_norm / (50.0 * B * std::sqrt(std::log(2.0 * K) * static_cast<double>(n)));
}

Vec per_class_to_per_sample(const Vec& v, Index n, Index K) {
  require(v.size() == n * K, ErrorCode::DimensionMismatch, "vector length");
  Vec out(v.size());
  for (Index l = 0; l < K; ++l)
    for (Index i = 0; i < n; ++i) out(i * K + l) = v(l * n + i);
  return out;
}

Vec per_sample_to_per_class(const Vec& v, Index n, Index K) {
  require(v.size() == n * K, ErrorCode::DimensionMismatch, "vector length");
  Vec out(v.size());
  for (Index l = 0; l < K; ++l)
    for (Index i = 0; i < n; ++i) out(l * n + i) = v(i * K + l);
  return out;
}

}  // namespace ntks
