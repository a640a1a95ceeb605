#pragma once

#include <map>
#include <string>

#include <json.hpp>

#include "ntks/spectral.hpp"

namespace ntks {

// Generalization-bound evaluation split into bias, variance and slack terms.
// Constants hidden by order-of-magnitude statements are set to 1; reports are
// formula evaluations, not certified probabilities.
struct BoundReport {
  double bias = 0.0;
  double variance = 0.0;
  std::map<std::string, double> slack;
  double total = 0.0;
  nlohmann::json inputs = nlohmann::json::object();
  nlohmann::json extras = nlohmann::json::object();

  double slack_sum() const;
};

nlohmann::json to_json(const BoundReport& r);

struct AlignmentMetrics {
  double y_info = 0.0;      // ||P_I y|| / ||y||
  double y_nuisance = 0.0;  // ||P_N y|| / ||y||
  double y_pinv = 0.0;      // ||J_I^+ y|| / ||y||
  double r0_info = 0.0;
  double r0_nuisance = 0.0;
  double r0_pinv = 0.0;
};

AlignmentMetrics alignment_metrics(const InfoNuisanceSplit& split, const Vec& y, const Vec& r0);
nlohmann::json to_json(const AlignmentMetrics& a);

struct RandomInitParams {
  double n = 0.0;
  double K = 1.0;
  double B = 1.0;
  double gamma = 1.0;
  double zeta = 0.5;
  double delta = 0.1;
  double opnorm_X = 1.0;
};

// Bound for a randomly initialized network. `split` is a split of the
// multiclass kernel square root at alpha0 = split.cutoff, and
// alpha_bar = alpha0 / (n^{1/4} sqrt(K ||X||) B).
//   bias      2 ||P_N y|| / sqrt(n)
//   variance  (12 B sqrt(K) / sqrt(n)) (||J_I^+ y|| + (Gamma/alpha0) ||P_N y||)
//   slack     zeta: 12 (1 + Gamma / (alpha_bar (n ||X||^2)^{1/4})) zeta,
//             confidence: 5 sqrt(log(2/delta)/n), optimization: 2 e^{-Gamma}
// extras carry the simplified bound, the early-stopping-distance variant and,
// when the cutoff is the smallest singular value, the full-space form.
BoundReport random_init_bound(const InfoNuisanceSplit& split, const Vec& y,
                              const RandomInitParams& p);

struct ArbitraryInitParams {
  double n = 0.0;
  double nu = 1.0;
  double B = 1.0;
  double gamma = 1.0;
  double zeta = 0.5;
  double delta = 0.1;
  double C_r = 1.0;
  double opnorm_X = 0.0;  // only used to echo alpha_bar when positive
};

// Bound for an arbitrary initialization, split of J(W0) at alpha:
//   bias      2 ||P_N r0|| / sqrt(n)
//   variance  (12 nu B / sqrt(n)) (||J_I^+ r0|| + (Gamma/alpha) ||P_N r0||)
//   slack     confidence: 5 sqrt(log(2/delta)/n), optimization: 2 C_r e^{-Gamma},
//             zeta: 2 C_r zeta
// Requires ||r0|| / sqrt(n) <= C_r.
BoundReport arbitrary_init_bound(const InfoNuisanceSplit& split, const Vec& r0,
                                 const ArbitraryInitParams& p);

struct GmmBound {
  double error_bound = 0.0;  // Gamma sqrt(K^2 C / (n lambda_M))
  int T = 0;                 // ceil(2 Gamma K^2 C / lambda_M)
};

GmmBound gmm_bound(double K, double C, double n, double lambda_M, double gamma);

enum class WidthMode { Order, Appendix };

struct WidthExtras {
  double K = 0.0;
  double B = 0.0;
  double opnorm_X = 0.0;
  double c = 0.0;
  double alpha0 = 0.0;
};

// Order mode: ceil(Gamma^4 log n / (zeta^4 alpha_bar^8)).
// Appendix mode: ceil(12e7 Gamma^4 K^4 B^8 ||X||^6 n log n / (c^4 zeta^4 alpha0^8)).
// Returned as an integer-valued double since the values overflow 64-bit integers.
double width_requirement(double gamma, double zeta, double alpha_bar, double n, WidthMode mode,
                         const WidthExtras* extras = nullptr);

}  // namespace ntks
