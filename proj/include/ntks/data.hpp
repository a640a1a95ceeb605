#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ntks/shallownet.hpp"
#include "ntks/spectral.hpp"

namespace ntks {

// X = clean_X + Z with clean_X = U V^T of rank r, y = clean_X w* + z.
// Z entries have variance sigma_x^2 / n, z entries sigma_y^2 / n.
struct LinearCorruptedModel {
  Index n = 0, d = 0, r = 0;
  double sigma_x = 0.0, sigma_y = 0.0;
  Mat clean_X;
  Mat Z;
  Mat X;
  Vec w_star;
  Vec clean_y;
  Vec z;
  Vec y;
  Mat U;  // n x r
  Mat V;  // d x r
};

LinearCorruptedModel gen_linear_model(Index n, Index d, Index r, double sigma_x, double sigma_y,
                                      std::uint64_t seed, double w_star_norm = 1.0);

// Expected half squared test residual on a fresh draw of (Z, z), split with
// the projector U U^T onto the range of the clean features. total = info + nuisance.
struct PopulationLoss {
  double total = 0.0;
  double info = 0.0;
  double nuisance = 0.0;
};

PopulationLoss linear_population_loss(const LinearCorruptedModel& model, const Vec& w);

struct PopulationLossEstimate {
  PopulationLoss mean;
  PopulationLoss standard_error;
};

// Monte-Carlo estimate of the same quantities. For fixed w the test residual
// noise Z' w - z' is N(0, (sigma_x^2 ||w||^2 + sigma_y^2)/n I_n), which is
// sampled directly.
PopulationLossEstimate linear_population_loss_mc(const LinearCorruptedModel& model, const Vec& w,
                                                 int draws, std::uint64_t seed);

struct LinearGdRecord {
  int iter = 0;
  Vec w;
  PopulationLoss loss;
};

// w_{t+1} = (I - eta X^T X) w_t + eta X^T y from w_0 = 0.
std::vector<LinearGdRecord> linear_gd(const LinearCorruptedModel& model, double eta, int T);

struct MixtureSpec {
  Index K = 2;
  Index C = 1;
  double sigma = 0.1;
  Mat centers;  // KC x d, unit rows; cluster c belongs to class c / C
  double min_center_distance = 0.5;
  Index n = 0;
};

// Rejection-samples unit centers until all pairwise distances reach the
// threshold; throws InfeasibleSpec when the retry budget runs out.
MixtureSpec make_mixture_spec(Index K, Index C, Index d, double sigma, double min_center_distance,
                              Index n, std::uint64_t seed, int max_attempts = 100000);

struct ClassificationDataset {
  Mat X;
  std::vector<int> labels;
  Mat Y;         // n x K one-hot
  Vec concat_y;  // per-class layout
  std::vector<int> clusters;
  Index K = 0;

  Index n() const { return X.rows(); }
};

ClassificationDataset make_dataset(const Mat& X, const std::vector<int>& labels, Index K,
                                   std::vector<int> clusters = {});

enum class ClusterSampling { Iid, Balanced };

// Balanced mode requires KC | n and assigns sample i to cluster i mod KC.
ClassificationDataset gen_gmm(const MixtureSpec& spec, std::uint64_t seed,
                              ClusterSampling mode = ClusterSampling::Iid);

// Changes exactly round(fraction n) uniformly chosen labels to a uniformly
// chosen different class.
ClassificationDataset corrupt_labels(const ClassificationDataset& ds, double fraction,
                                     std::uint64_t seed);

// Lowest index wins argmax ties.
int argmax_lowest(const Eigen::Ref<const Vec>& v);
double classification_error(const ShallowNet& net, const ClassificationDataset& ds);

// Rescales every row of X to unit Euclidean norm.
Mat normalize_rows(const Mat& X);

// CSV with columns x0..x{d-1},label,cluster under a '#' schema line, plus a
// JSON sidecar at path + ".json" holding K and any spec metadata given.
void save_dataset(const ClassificationDataset& ds, const std::string& csv_path,
                  const MixtureSpec* spec = nullptr);
ClassificationDataset load_dataset(const std::string& csv_path);

}  // namespace ntks
