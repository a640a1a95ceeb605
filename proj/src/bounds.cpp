#include "ntks/bounds.hpp"

#include <cmath>

#include "ntks/errors.hpp"

namespace ntks {

double BoundReport::slack_sum() const {
  double s = 0.0;
  for (const auto& kv : slack) s += kv.second;
  return s;
}

nlohmann::json to_json(const BoundReport& r) {
  nlohmann::json j;
  j["bias"] = r.bias;
  j["variance"] = r.variance;
  j["slack"] = r.slack;
  j["total"] = r.total;
  j["inputs"] = r.inputs;
  j["extras"] = r.extras;
  return j;
}

AlignmentMetrics alignment_metrics(const InfoNuisanceSplit& split, const Vec& y, const Vec& r0) {
  const double yn = y.norm();
  const double rn = r0.norm();
  require(yn > 0.0, ErrorCode::DivisionByZero, "label vector has zero norm");
  require(rn > 0.0, ErrorCode::DivisionByZero, "initial residual has zero norm");
  AlignmentMetrics a;
  a.y_info = (split.info_basis.transpose() * y).norm() / yn;
  a.y_nuisance = (split.nuisance_basis.transpose() * y).norm() / yn;
  a.y_pinv = truncated_pinv_norm(split, y) / yn;
  a.r0_info = (split.info_basis.transpose() * r0).norm() / rn;
  a.r0_nuisance = (split.nuisance_basis.transpose() * r0).norm() / rn;
  a.r0_pinv = truncated_pinv_norm(split, r0) / rn;
  return a;
}

nlohmann::json to_json(const AlignmentMetrics& a) {
  return {{"y_info", a.y_info},     {"y_nuisance", a.y_nuisance},   {"y_pinv", a.y_pinv},
          {"r0_info", a.r0_info},   {"r0_nuisance", a.r0_nuisance}, {"r0_pinv", a.r0_pinv}};
}

namespace {

void check_common(double n, double gamma, double zeta, double delta) {
  require(n >= 1.0, ErrorCode::InvalidArgument, "n must be >= 1");
  require(gamma >= 1.0, ErrorCode::InvalidArgument, "Gamma must be >= 1");
  require(zeta > 0.0 && zeta <= 0.5, ErrorCode::InvalidArgument, "zeta must be in (0, 1/2]");
  require(delta > 0.0 && delta < 1.0, ErrorCode::InvalidArgument, "delta must be in (0, 1)");
}

double nuisance_norm(const InfoNuisanceSplit& split, const Vec& v) {
  return (split.nuisance_basis.transpose() * v).norm();
}

}  // namespace

BoundReport random_init_bound(const InfoNuisanceSplit& split, const Vec& y,
                              const RandomInitParams& p) {
  check_common(p.n, p.gamma, p.zeta, p.delta);
  require(p.K >= 1.0 && p.B > 0.0 && p.opnorm_X > 0.0, ErrorCode::InvalidArgument,
          "K, B and ||X|| must be positive");
  require(y.size() == split.info_basis.rows(), ErrorCode::DimensionMismatch, "label length");
  const double alpha0 = split.cutoff;
  require(alpha0 > 0.0, ErrorCode::InvalidCutoff, "alpha0 must be > 0");
  require(split.parent && alpha0 <= split.parent->singular_values(0), ErrorCode::CutoffTooLarge,
          "alpha0 above the top singular value");

  const double sn = std::sqrt(p.n);
  const double alpha_bar = alpha0 / (std::pow(p.n, 0.25) * std::sqrt(p.K * p.opnorm_X) * p.B);
  const double pn = nuisance_norm(split, y);
  const double pinv = truncated_pinv_norm(split, y);
  const double root = alpha_bar * std::pow(p.n * p.opnorm_X * p.opnorm_X, 0.25);

  BoundReport r;
  r.bias = 2.0 * pn / sn;
  r.variance = (12.0 * p.B * std::sqrt(p.K) / sn) * (pinv + (p.gamma / alpha0) * pn);
  r.slack["zeta"] = 12.0 * (1.0 + p.gamma / root) * p.zeta;
  r.slack["confidence"] = 5.0 * std::sqrt(std::log(2.0 / p.delta) / p.n);
  r.slack["optimization"] = 2.0 * std::exp(-p.gamma);
  r.total = r.bias + r.variance + r.slack_sum();

  r.inputs = {{"alpha0", alpha0}, {"alpha_bar", alpha_bar}, {"Gamma", p.gamma},
              {"zeta", p.zeta},   {"delta", p.delta},       {"B", p.B},
              {"n", p.n},         {"K", p.K},               {"opnorm_X", p.opnorm_X},
              {"nu", p.zeta / (50.0 * p.B * std::sqrt(std::log(2.0 * p.K)))},
              {"rank", split.rank}};

  const double simplified = r.bias + 36.0 * p.gamma / root + 12.0 * p.zeta +
                            r.slack["confidence"] + r.slack["optimization"];
  const double es_distance = early_stopping_distance(split, y, p.gamma);
  const double pi = (split.info_basis.transpose() * y).norm();
  const double es_upper = std::sqrt(pi * pi + p.gamma * p.gamma * pn * pn) / alpha0;
  r.extras["simplified_total"] = simplified;
  r.extras["variance_early_stopping"] = (12.0 * p.B * std::sqrt(p.K) / sn) * es_distance;
  r.extras["variance_early_stopping_upper"] = (12.0 * p.B * std::sqrt(p.K) / sn) * es_upper;
  r.extras["constants_set_to_one"] = true;
  const Vec& lam = split.parent->singular_values;
  const double lam_min = lam(lam.size() - 1);
  if (split.rank == lam.size() && lam_min > 0.0) {
    // J = Sigma^{1/2}, so y^T Sigma^{-1} y = ||J^+ y||^2
    r.extras["full_space_total"] =
        std::sqrt(p.K / p.n) * pinv + std::sqrt(std::log(2.0 / p.delta) / p.n);
  }
  return r;
}

BoundReport arbitrary_init_bound(const InfoNuisanceSplit& split, const Vec& r0,
                                 const ArbitraryInitParams& p) {
  check_common(p.n, p.gamma, p.zeta, p.delta);
  require(p.nu > 0.0 && p.B > 0.0 && p.C_r > 0.0, ErrorCode::InvalidArgument,
          "nu, B and C_r must be positive");
  require(r0.size() == split.info_basis.rows(), ErrorCode::DimensionMismatch, "residual length");
  const double alpha = split.cutoff;
  require(alpha > 0.0, ErrorCode::InvalidCutoff, "alpha must be > 0");
  const double sn = std::sqrt(p.n);
  require(r0.norm() / sn <= p.C_r, ErrorCode::Precondition,
          "||r0|| / sqrt(n) = " + std::to_string(r0.norm() / sn) + " exceeds C_r");
  const double pn = nuisance_norm(split, r0);
  const double pinv = truncated_pinv_norm(split, r0);

  BoundReport r;
  r.bias = 2.0 * pn / sn;
  r.variance = (12.0 * p.nu * p.B / sn) * (pinv + (p.gamma / alpha) * pn);
  r.slack["confidence"] = 5.0 * std::sqrt(std::log(2.0 / p.delta) / p.n);
  r.slack["optimization"] = 2.0 * p.C_r * std::exp(-p.gamma);
  r.slack["zeta"] = 2.0 * p.C_r * p.zeta;
  r.total = r.bias + r.variance + r.slack_sum();
  r.inputs = {{"alpha", alpha}, {"Gamma", p.gamma}, {"zeta", p.zeta}, {"delta", p.delta},
              {"nu", p.nu},     {"B", p.B},         {"n", p.n},       {"C_r", p.C_r},
              {"rank", split.rank}};
  if (p.opnorm_X > 0.0)
    r.inputs["alpha_bar"] = alpha / (p.nu * p.B * std::pow(p.n, 0.25) * std::sqrt(p.opnorm_X));
  const double es_distance = early_stopping_distance(split, r0, p.gamma);
  const double pi = (split.info_basis.transpose() * r0).norm();
  const double es_upper = std::sqrt(pi * pi + p.gamma * p.gamma * pn * pn) / alpha;
  r.extras["variance_early_stopping"] = (12.0 * p.nu * p.B / sn) * es_distance;
  r.extras["variance_early_stopping_upper"] = (12.0 * p.nu * p.B / sn) * es_upper;
  r.extras["constants_set_to_one"] = true;
  return r;
}

GmmBound gmm_bound(double K, double C, double n, double lambda_M, double gamma) {
  require(lambda_M > 0.0, ErrorCode::InvalidArgument, "lambda_M must be > 0");
  require(K >= 1.0 && C >= 1.0 && n >= 1.0, ErrorCode::InvalidArgument, "K, C, n must be >= 1");
  require(gamma >= 1.0, ErrorCode::InvalidArgument, "Gamma must be >= 1");
  GmmBound out;
  out.error_bound = gamma * std::sqrt(K * K * C / (n * lambda_M));
  out.T = static_cast<int>(std::ceil(2.0 * gamma * K * K * C / lambda_M));
  return out;
}

double width_requirement(double gamma, double zeta, double alpha_bar, double n, WidthMode mode,
                         const WidthExtras* extras) {
  require(gamma > 0.0 && zeta > 0.0 && n > 0.0, ErrorCode::InvalidArgument,
          "width parameters must be positive");
  const double logn = std::log(n);
  if (mode == WidthMode::Order) {
    require(alpha_bar > 0.0, ErrorCode::InvalidArgument, "alpha_bar must be positive");
    return std::ceil(std::pow(gamma, 4) * logn / (std::pow(zeta, 4) * std::pow(alpha_bar, 8)));
  }
  require(extras != nullptr, ErrorCode::InvalidArgument, "appendix mode needs K, B, ||X||, c, alpha0");
  const WidthExtras& e = *extras;
  require(e.K > 0 && e.B > 0 && e.opnorm_X > 0 && e.c > 0 && e.alpha0 > 0,
          ErrorCode::InvalidArgument, "appendix mode arguments must be positive");
  return std::ceil(12e7 * std::pow(gamma, 4) * std::pow(e.K, 4) * std::pow(e.B, 8) *
                   std::pow(e.opnorm_X, 6) * n * logn /
                   (std::pow(e.c, 4) * std::pow(zeta, 4) * std::pow(e.alpha0, 8)));
}

}  // namespace ntks
