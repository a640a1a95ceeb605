#include "ntks/lindyn.hpp"

#include <algorithm>
#include <climits>
#include <cmath>

#include "ntks/ntk.hpp"
#include "ntks/rng.hpp"

namespace ntks {

namespace {

void check_step(const SpectralDecomposition& d, double eta) {
  require(eta >= 0.0 && std::isfinite(eta), ErrorCode::InvalidArgument, "step size must be >= 0");
  if (d.singular_values.size() == 0) return;
  const double top = d.singular_values(0);
  require(eta * top * top <= 1.0 + 1e-12, ErrorCode::StepSize,
          "eta exceeds 1 / lambda_1^2 of the reference Jacobian");
}

Vec pad_to(const Vec& v, Index size) {
  Vec out = Vec::Zero(size);
  out.head(v.size()) = v;
  return out;
}

Vec vect_rows(const Mat& W) {
  const Mat Wt = W.transpose();
  return Eigen::Map<const Vec>(Wt.data(), Wt.size());
}

}  // namespace

ReferenceJacobian make_reference(const Mat& J, double beta) {
  require(J.allFinite(), ErrorCode::NonFinite, "reference Jacobian");
  require(beta > 0.0 && std::isfinite(beta), ErrorCode::InvalidArgument, "beta must be > 0");
  const Index m = J.rows();
  const Index cols = std::max(J.rows(), J.cols());
  ReferenceJacobian ref;
  ref.matrix = Mat::Zero(m, cols);
  ref.matrix.leftCols(J.cols()) = J;
  ref.beta = beta;
  ref.decomposition = std::make_shared<const SpectralDecomposition>(svd(ref.matrix));
  const double top = m > 0 ? ref.decomposition->singular_values(0) : 0.0;
  require(top <= beta * (1.0 + 1e-10), ErrorCode::Precondition,
          "||J|| = " + std::to_string(top) + " exceeds beta = " + std::to_string(beta));
  return ref;
}

Vec linearized_residual(const SpectralDecomposition& d, const Vec& r0, double eta, int tau) {
  require(r0.size() == d.rows(), ErrorCode::DimensionMismatch, "residual length");
  require(tau >= 0, ErrorCode::InvalidArgument, "tau must be >= 0");
  check_step(d, eta);
  Vec a = d.left_vectors.transpose() * r0;
  for (Index s = 0; s < a.size(); ++s) {
    const double lam = d.singular_values(s);
    a(s) *= std::pow(1.0 - eta * lam * lam, tau);
  }
  return d.left_vectors * a;
}

Vec linearized_param_offset(const SpectralDecomposition& d, const Vec& r0, double eta, int tau) {
  require(r0.size() == d.rows(), ErrorCode::DimensionMismatch, "residual length");
  require(tau >= 0, ErrorCode::InvalidArgument, "tau must be >= 0");
  require(d.has_right_vectors(), ErrorCode::InvalidArgument,
          "parameter offsets need right singular vectors");
  check_step(d, eta);
  const Index m = d.rows();
  Vec c = Vec::Zero(m);
  if (tau > 0) {
    const Vec a = d.left_vectors.transpose() * r0;
    for (Index s = 0; s < m; ++s) {
      const double lam = d.singular_values(s);
      if (lam == 0.0) continue;
      const double x = eta * lam * lam;
      // 1 - (1 - x)^tau, accurate for small x
      const double decay = x >= 1.0 ? 1.0 : -std::expm1(tau * std::log1p(-x));
      c(s) = -a(s) * decay / lam;
    }
  }
  return d.right_vectors * c;
}

double reference_epsilon(const ReferenceJacobian& ref, const Mat& J0) {
  const Index m = ref.matrix.rows();
  require(J0.rows() == m && J0.cols() <= ref.matrix.cols(), ErrorCode::DimensionMismatch,
          "J0 shape incompatible with the padded reference");
  Mat padded = Mat::Zero(m, ref.matrix.cols());
  padded.leftCols(J0.cols()) = J0;
  const double direct = opnorm(padded - ref.matrix);
  const double gram = sym_opnorm(J0 * J0.transpose() - ref.matrix * ref.matrix.transpose());
  return std::max(direct, std::sqrt(gram));
}

double lipschitz_probe(const ShallowNet& net, const Mat& X, double radius, int num_probes,
                       std::uint64_t seed) {
  require(radius >= 0.0 && std::isfinite(radius), ErrorCode::InvalidArgument,
          "radius must be >= 0");
  require(num_probes >= 0, ErrorCode::InvalidArgument, "num_probes must be >= 0");
  if (radius == 0.0 || num_probes == 0) return 0.0;
  const Mat D0 = activation_derivatives(net, X);
  const double p = static_cast<double>(net.W.size());
  Rng rng(seed);
  double best = 0.0;
  for (int i = 0; i < num_probes; ++i) {
    Mat dir = rng.normal_matrix(net.k(), net.d());
    dir /= dir.norm();
    const double u = rng.uniform();
    const double rho = (i % 2 == 0) ? radius : radius * std::pow(u, 1.0 / p);
    ShallowNet moved = net;
    moved.W += rho * dir;
    const Mat dD = activation_derivatives(moved, X) - D0;
    const double drift = std::sqrt(std::max(sym_opnorm(jacobian_gram(net.V, dD, X)), 0.0));
    best = std::max(best, drift);
  }
  return best;
}

int stopping_time(double gamma, double eta, double alpha) {
  require(eta > 0.0 && alpha > 0.0 && gamma > 0.0, ErrorCode::InvalidArgument,
          "stopping time needs positive eta, alpha, Gamma");
  const double t = std::ceil(gamma / (eta * alpha * alpha));
  require(t < static_cast<double>(INT_MAX / 2), ErrorCode::InvalidArgument,
          "stopping time too large");
  return static_cast<int>(t);
}

CoupledTrajectory coupled_run(const ShallowNet& net, const Mat& X, const Vec& y,
                              const ReferenceJacobian& ref, double alpha, double gamma,
                              double eta, double delta, const CoupledOptions& opts) {
  const Index n = X.rows(), K = net.K();
  const Index m = n * K;
  require(y.size() == m, ErrorCode::DimensionMismatch, "label vector length");
  require(ref.matrix.rows() == m && ref.matrix.cols() >= net.W.size(),
          ErrorCode::DimensionMismatch, "reference Jacobian shape");
  require(gamma >= 1.0, ErrorCode::InvalidArgument, "Gamma must be >= 1");
  require(delta > 0.0 && delta <= 1.0, ErrorCode::InvalidArgument, "delta must be in (0, 1]");
  require(alpha > 0.0, ErrorCode::InvalidCutoff, "alpha must be > 0");
  require(eta > 0.0 && eta * ref.beta * ref.beta <= 1.0 + 1e-12, ErrorCode::StepSize,
          "eta must satisfy 0 < eta <= 1 / beta^2");
  require(opts.stride >= 1, ErrorCode::InvalidArgument, "stride must be >= 1");

  const SpectralDecomposition& dec = *ref.decomposition;
  const InfoNuisanceSplit split = split_at_cutoff(ref.decomposition, alpha);
  const Index P = ref.matrix.cols();

  CoupledTrajectory out;
  CoupledReport& rep = out.report;
  rep.eta = eta;
  rep.alpha = alpha;
  rep.gamma = gamma;
  rep.delta = delta;
  rep.beta = ref.beta;
  rep.T = stopping_time(gamma, eta, alpha);
  rep.rank = split.rank;

  const Vec r0 = forward_concat(net, X) - y;
  rep.r0_norm = r0.norm();
  rep.r0_info = (split.info_basis.transpose() * r0).norm();
  rep.r0_nuisance = (split.nuisance_basis.transpose() * r0).norm();
  rep.pinv_r0 = truncated_pinv_norm(split, r0);
  const double dist_bound = rep.pinv_r0 + (gamma / alpha) * rep.r0_nuisance +
                            delta * (gamma / alpha) * rep.r0_norm;
  rep.radius = 2.0 * dist_bound;

  const Vec theta0 = pad_to(vect_rows(net.W), P);
  const Mat D0 = activation_derivatives(net, X);

  std::vector<double> gap_norms, lin_norms;
  double max_gap = 0.0, max_param_gap = 0.0, max_dist = 0.0, max_drift = 0.0;
  double final_residual = 0.0;

  ShallowNet cur = net;
  for (int tau = 0; tau <= rep.T; ++tau) {
    const Vec r = tau == 0 ? r0 : Vec(forward_concat(cur, X) - y);
    require(r.allFinite(), ErrorCode::NonFinite, "residual at iteration " + std::to_string(tau));
    require(r.norm() <= 1e8 * std::max(rep.r0_norm, 1e-300), ErrorCode::Divergence,
            "residual exploded at iteration " + std::to_string(tau));
    const Vec r_lin = linearized_residual(dec, r0, eta, tau);
    const Vec offset = linearized_param_offset(dec, r0, eta, tau);
    const Vec theta = pad_to(vect_rows(cur.W), P);

    CoupledRecord rec;
    rec.iter = tau;
    rec.residual = r.norm();
    rec.linear_residual = r_lin.norm();
    rec.coupling_gap = (r - r_lin).norm();
    rec.param_gap = ((theta - theta0) - offset).norm();
    rec.dist_from_init = (theta - theta0).norm();
    rec.proj_info = (split.info_basis.transpose() * r).norm();
    rec.proj_nuisance = (split.nuisance_basis.transpose() * r).norm();
    if (tau > 0) {
      const Mat dD = activation_derivatives(cur, X) - D0;
      rec.jacobian_drift = std::sqrt(std::max(sym_opnorm(jacobian_gram(net.V, dD, X)), 0.0));
    }

    gap_norms.push_back(rec.coupling_gap);
    lin_norms.push_back(rec.linear_residual);
    max_gap = std::max(max_gap, rec.coupling_gap);
    max_param_gap = std::max(max_param_gap, rec.param_gap);
    max_dist = std::max(max_dist, rec.dist_from_init);
    max_drift = std::max(max_drift, rec.jacobian_drift);
    final_residual = rec.residual;
    if (tau % opts.stride == 0 || tau == rep.T) out.records.push_back(rec);

    if (tau == rep.T) break;
    const Mat G = vjp(cur, X, r);
    require(G.allFinite(), ErrorCode::NonFinite, "gradient at iteration " + std::to_string(tau));
    cur.W -= eta * G;
  }

  auto check = [](double measured, double bound) {
    InequalityCheck c;
    c.measured = measured;
    c.bound = bound;
    c.slack = bound - measured;
    c.holds = c.slack >= 0.0;
    return c;
  };
  const double ratio = delta * alpha / ref.beta;
  rep.residual_coupling = check(max_gap, 0.6 * ratio * rep.r0_norm);
  rep.param_coupling = check(max_param_gap, delta * (gamma / alpha) * rep.r0_norm);
  rep.distance = check(max_dist, dist_bound);
  rep.final_residual =
      check(final_residual, std::exp(-gamma) * rep.r0_info + rep.r0_nuisance + ratio * rep.r0_norm);

  const Mat J0 = jacobian_dense(net, X);
  rep.eps0 = reference_epsilon(ref, J0);
  rep.eps_probe = 2.0 * lipschitz_probe(net, X, rep.radius, opts.probes, opts.probe_seed);
  rep.eps_path = 2.0 * max_drift;
  const double b = ref.beta;
  rep.eps0_limit = std::min(delta * alpha, std::sqrt(delta * alpha * alpha * alpha / (gamma * b))) / 5.0;
  rep.eps_limit = delta * alpha * alpha * alpha / (5.0 * gamma * b * b);
  rep.hypotheses_verified =
      rep.eps0 <= rep.eps0_limit && std::max(rep.eps_probe, rep.eps_path) <= rep.eps_limit;

  const double eps_hat = rep.eps_path;
  for (std::size_t t = 0; t + 1 < gap_norms.size(); ++t) {
    const double rhs = eta * (rep.eps0 * rep.eps0 + eps_hat * b) * lin_norms[t] +
                       (1.0 + eta * eps_hat * eps_hat) * gap_norms[t];
    if (gap_norms[t + 1] > rhs * (1.0 + 1e-12) + 1e-300) ++rep.one_step_violations;
  }
  return out;
}

GrowthCheck scalar_growth_check(double gamma, double alpha, double eps, double eta,
                                double rho_plus, double rho_minus, double theta) {
  require(gamma >= 1.0 && alpha > 0.0 && eps >= 0.0 && eta > 0.0, ErrorCode::InvalidArgument,
          "growth check parameters");
  require(rho_plus >= 0.0 && rho_minus >= 0.0 && theta >= 0.0, ErrorCode::InvalidArgument,
          "growth check magnitudes");
  require(eta * alpha * alpha <= 1.0, ErrorCode::Precondition, "eta must be <= 1/alpha^2");
  require(alpha >= std::sqrt(2.0 * gamma) * eps, ErrorCode::Precondition,
          "alpha must be >= sqrt(2 Gamma) eps");
  GrowthCheck out;
  const double horizon = gamma / (eta * alpha * alpha);
  require(horizon < 1e8, ErrorCode::InvalidArgument, "horizon too long");
  out.T = static_cast<int>(std::floor(horizon));
  out.bound = theta * 2.0 * (gamma * rho_minus + rho_plus) / (alpha * alpha);
  const double q = 1.0 - eta * alpha * alpha;
  double e = 0.0, decay = 1.0;
  for (int tau = 1; tau <= out.T; ++tau) {
    const double r_prev = decay * rho_plus + rho_minus;
    e = (1.0 + eta * eps * eps) * e + eta * theta * r_prev;
    decay *= q;
    out.max_e = std::max(out.max_e, e);
  }
  out.holds = out.max_e <= out.bound * (1.0 + 1e-12);
  return out;
}

}  // namespace ntks
