#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ntks/bounds.hpp"
#include "ntks/cli/config.hpp"
#include "ntks/data.hpp"
#include "ntks/lindyn.hpp"
#include "ntks/shallownet.hpp"

namespace ntks::cli {

// Output file name -> content.
using FileSet = std::map<std::string, std::string>;

std::string dump_json(const json& j);

// ---------------------------------------------------------------- linear_demo

struct LinearDemoParams {
  std::uint64_t seed = 0;
  Index n = 200, d = 500, r = 5;
  double sigma_x = 0.2, sigma_y = 2.0;
  double w_star_norm = 1.0;
  double eta_scale = 0.1;  // eta = eta_scale / ||X||^2 unless eta is given
  std::optional<double> eta;
  int T = 300;
  int mc_draws = 2000;
  int stride = 1;
};

struct LinearDemoRow {
  int iter = 0;
  PopulationLoss exact;
  PopulationLoss mc;
  PopulationLoss mc_stderr;
};

struct LinearDemoResult {
  LinearDemoParams params;
  double eta = 0.0;
  double opnorm_X = 0.0;
  std::vector<LinearDemoRow> rows;  // every iteration
  int tau_star = 0;                 // argmin of the exact total, lowest index
  bool dip = false;                 // 0 < tau* < T
  bool info_decreasing_before = false;
  bool nuisance_increasing_after = false;
  bool info_decreasing_after = false;
  int info_argmin = 0;
};

LinearDemoParams parse_linear_demo(ConfigReader& c);
LinearDemoResult run_linear_demo(const LinearDemoParams& p);
FileSet render(const LinearDemoResult& r);

// --------------------------------------------------------------- gmm_spectrum

struct GmmSpectrumParams {
  std::uint64_t seed = 0;
  Index K = 3, C = 2, d = 32, k = 1000;
  double sigma = 0.1;
  double min_dist = 0.5;
  std::vector<long long> n_per_cluster_count = {30, 60};  // n = value * C
  double zeta = 0.5;
  std::optional<double> nu;
  int num_seeds = 3;
  bool balanced = false;
  std::string activation = "softplus";
  int kernel_samples = 20000;
  double rank_tol = 1e-8;
};

struct GmmSpectrumRun {
  int seed_index = 0;
  Index n = 0;
  Vec singular_raw;         // singular values of J(W0), descending
  Vec singular_normalized;  // times sqrt(KC/n)
  Vec kernel_eigenvalues;   // eigenvalues of I_K (x) Sigma~(X), descending
  Index kernel_rank = 0;
  std::optional<double> identity_rel_error;  // balanced sampling with sigma = 0 only
};

struct GmmSpectrumResult {
  GmmSpectrumParams params;
  double nu = 0.0;
  std::vector<GmmSpectrumRun> runs;
  // Per seed: median of the top-KC singular values at the last n divided by
  // the same at the first n; then the median over seeds.
  std::vector<double> ratio_normalized_per_seed, ratio_raw_per_seed;
  double ratio_normalized = 0.0, ratio_raw = 0.0;
};

GmmSpectrumParams parse_gmm_spectrum(ConfigReader& c);
GmmSpectrumResult run_gmm_spectrum(const GmmSpectrumParams& p);
FileSet render(const GmmSpectrumResult& r);

// ---------------------------------------------------------------- train_track

struct GmmTrainParams {
  std::uint64_t seed = 0;
  Index K = 2, C = 2, d = 32, n = 100, n_test = 400, k = 1000;
  double sigma = 0.1;
  double min_dist = 0.5;
  bool balanced = false;
  bool normalize_inputs = false;
  double zeta = 0.5;
  std::optional<double> nu;
  double gamma = 2.0;
  double eta_scale = 1.0;  // eta = eta_scale / (nu^2 B^2 ||X||^2)
  std::optional<int> T;    // default: the stopping time ceil(Gamma / (eta alpha^2))
  int max_iters = 200000;
  std::string split_source = "kernel_sqrt";
  std::optional<long long> rank;      // default: spectral gap
  std::optional<long long> gap_search;  // default: K^2 C + 1
  std::string activation = "softplus";
  int kernel_samples = 20000;
  int stride = 1;
  double corruption = 0.0;
};

struct TrackRow {
  int iter = 0;
  double loss = 0.0;
  double residual = 0.0;
  double proj_info = 0.0;
  double proj_nuisance = 0.0;
  double dist_fro = 0.0;
  double dist_2inf = 0.0;
  double train_err = 0.0;
  double test_err = 0.0;
};

struct TrainTrackResult {
  GmmTrainParams params;
  double nu = 0.0, eta = 0.0, opnorm_X = 0.0;
  int T = 0;
  Index rank = 0;         // information-space dimension of the tracked split
  double cutoff = 0.0;    // cutoff of the tracked split
  Index jacobian_rank = 0;
  std::vector<TrackRow> rows;
  AlignmentMetrics alignment_initial;
  std::optional<AlignmentMetrics> alignment_final;
  double info_ratio_sq = 0.0;      // ||P_I r_T||^2 / ||P_I r_0||^2
  double nuisance_ratio_sq = 0.0;  // ||P_N r_T||^2 / ||P_N r_0||^2
  double final_train_err = 0.0, final_test_err = 0.0;
};

GmmTrainParams parse_gmm_train(ConfigReader& c, const GmmTrainParams& defaults = {});
void validate(const GmmTrainParams& p);
TrainTrackResult run_train_track(const GmmTrainParams& p);
FileSet render(const TrainTrackResult& r);

// -------------------------------------------------------------- corrupt_sweep

struct CorruptSweepParams {
  GmmTrainParams base;
  std::vector<double> fractions = {0.0, 0.25, 0.5, 0.75, 1.0};
  int num_seeds = 1;  // run seeds are base.seed, base.seed + 1, ...
};

struct SweepRow {
  double fraction = 0.0;
  std::uint64_t seed = 0;
  double y_nuisance_initial = 0.0;
  double y_nuisance_final = 0.0;
  double test_err = 0.0;
  double train_err = 0.0;
  Index rank = 0;
  int T = 0;
};

struct SweepSummaryRow {
  double fraction = 0.0;
  double y_nuisance_initial = 0.0;  // medians over seeds
  double y_nuisance_final = 0.0;
  double test_err = 0.0;
};

struct CorruptSweepResult {
  CorruptSweepParams params;
  std::vector<SweepRow> rows;
  std::vector<SweepSummaryRow> summary;
  bool nuisance_nondecreasing = false;
  bool test_err_nondecreasing = false;
};

// K = 10, C = 1, n = 200, k = 500, split on the initial Jacobian, endpoint logging.
GmmTrainParams corrupt_sweep_defaults();
CorruptSweepParams parse_corrupt_sweep(ConfigReader& c);
CorruptSweepResult run_corrupt_sweep(const CorruptSweepParams& p);
FileSet render(const CorruptSweepResult& r);

// ---------------------------------------------------------------- meta_verify

struct MetaVerifyParams {
  std::uint64_t seed = 0;
  Index K = 2, C = 2, d = 16, n = 40, k = 4000;
  double sigma = 0.1;
  double min_dist = 0.5;
  bool normalize_inputs = true;
  double nu = 1.0;
  double gamma = 2.0;
  double delta = 0.1;
  std::optional<double> eta;  // default 1 / (nu^2 B^2 ||X||^2) = 1 / beta^2
  std::optional<double> alpha;
  std::optional<long long> gap_search;
  std::string activation = "softplus";
  int probes = 20;
  int stride = 1;
  int max_iters = 200000;
};

struct MetaVerifyResult {
  MetaVerifyParams params;
  CoupledTrajectory run;
  double opnorm_X = 0.0;
};

MetaVerifyParams parse_meta_verify(ConfigReader& c);
MetaVerifyResult run_meta_verify(const MetaVerifyParams& p);
FileSet render(const MetaVerifyResult& r);
json to_json(const CoupledReport& r);

// ----------------------------------------------------------------- bound_eval

struct BoundEvalParams {
  std::uint64_t seed = 0;
  Index K = 3, C = 2, d = 32, n = 120, k = 1000;
  double sigma = 0.1;
  double min_dist = 0.5;
  bool balanced = false;
  double zeta = 0.5;
  double gamma = 2.0;
  double delta = 0.1;
  std::string alpha0 = "gap";  // "gap", "lambda_min" or a number
  std::optional<long long> gap_search;
  std::string activation = "softplus";
  int kernel_samples = 20000;
  std::optional<double> C_r;
  double width_c = 0.0;  // 0: use ||P_I y|| / ||y||
};

struct BoundEvalResult {
  BoundEvalParams params;
  BoundReport random_init;
  std::optional<BoundReport> arbitrary_init;
  GmmBound gmm;
  double lambda_M = 0.0;
  double width_order = 0.0;
  double width_appendix = 0.0;
  AlignmentMetrics alignment;
  json summary;
};

BoundEvalParams parse_bound_eval(ConfigReader& c);
BoundEvalResult run_bound_eval(const BoundEvalParams& p);
FileSet render(const BoundEvalResult& r);

// --------------------------------------------------------------- kernel_check

struct KernelCheckParams {
  std::uint64_t seed = 0;
  std::vector<long long> ks = {100, 400, 1600};
  Index n = 50, K = 2, d = 10;
  int num_seeds = 20;
  double nu = 1.0;
  std::string activation = "softplus";
  int kernel_samples = 100000;
};

struct KernelCheckRow {
  Index k = 0;
  double gap_mean = 0.0;
  double gap_stderr = 0.0;
  double gap_median = 0.0;
};

struct KernelCheckResult {
  KernelCheckParams params;
  std::vector<KernelCheckRow> rows;
  std::vector<std::vector<double>> gaps;  // [k index][trial]
  double mc_floor = 0.0;                  // kernel_error_scale of the reference kernel
  double median_ratio = 0.0;              // median gap at the first k / at the last k
};

KernelCheckParams parse_kernel_check(ConfigReader& c);
KernelCheckResult run_kernel_check(const KernelCheckParams& p);
FileSet render(const KernelCheckResult& r);

double median(std::vector<double> v);

}  // namespace ntks::cli
