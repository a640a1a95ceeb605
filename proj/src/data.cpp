#include "ntks/data.hpp"

#include <cmath>
#include <numeric>

#include <json.hpp>

#include "ntks/io.hpp"
#include "ntks/rng.hpp"

namespace ntks {

namespace {

Mat random_orthonormal(Index rows, Index cols, Rng& rng) {
  const Mat G = rng.normal_matrix(rows, cols);
  Eigen::HouseholderQR<Mat> qr(G);
  return qr.householderQ() * Mat::Identity(rows, cols);
}

}  // namespace

LinearCorruptedModel gen_linear_model(Index n, Index d, Index r, double sigma_x, double sigma_y,
                                      std::uint64_t seed, double w_star_norm) {
  require(n >= 1 && d >= 1, ErrorCode::InvalidArgument, "n and d must be >= 1");
  require(r >= 1 && r <= std::min(n, d), ErrorCode::InvalidArgument, "r must be in [1, min(n, d)]");
  require(sigma_x >= 0.0 && sigma_y >= 0.0, ErrorCode::InvalidArgument, "noise scales must be >= 0");
  require(w_star_norm >= 0.0, ErrorCode::InvalidArgument, "w* norm must be >= 0");
  Rng rng(seed);
  LinearCorruptedModel m;
  m.n = n;
  m.d = d;
  m.r = r;
  m.sigma_x = sigma_x;
  m.sigma_y = sigma_y;
  m.U = random_orthonormal(n, r, rng);
  m.V = random_orthonormal(d, r, rng);
  m.clean_X = m.U * m.V.transpose();
  const double sn = std::sqrt(static_cast<double>(n));
  m.Z = rng.normal_matrix(n, d) * (sigma_x / sn);
  m.X = m.clean_X + m.Z;
  const Vec g = rng.normal_vector(r);
  m.w_star = m.V * (g * (w_star_norm / g.norm()));
  m.clean_y = m.clean_X * m.w_star;
  m.z = rng.normal_vector(n) * (sigma_y / sn);
  m.y = m.clean_y + m.z;
  require(m.X.allFinite() && m.y.allFinite(), ErrorCode::NonFinite, "generated linear model");
  return m;
}

PopulationLoss linear_population_loss(const LinearCorruptedModel& model, const Vec& w) {
  require(w.size() == model.d, ErrorCode::DimensionMismatch, "weight length");
  const double fit = 0.5 * (model.clean_X * w - model.clean_y).squaredNorm();
  const double noise = model.sigma_x * model.sigma_x * w.squaredNorm() + model.sigma_y * model.sigma_y;
  const double frac = static_cast<double>(model.r) / static_cast<double>(model.n);
  PopulationLoss out;
  out.info = fit + 0.5 * frac * noise;
  out.nuisance = 0.5 * (1.0 - frac) * noise;
  out.total = out.info + out.nuisance;
  return out;
}

PopulationLossEstimate linear_population_loss_mc(const LinearCorruptedModel& model, const Vec& w,
                                                 int draws, std::uint64_t seed) {
  require(w.size() == model.d, ErrorCode::DimensionMismatch, "weight length");
  require(draws >= 2, ErrorCode::InvalidArgument, "need at least two draws");
  const Vec e = model.clean_X * w - model.clean_y;
  const double noise = model.sigma_x * model.sigma_x * w.squaredNorm() + model.sigma_y * model.sigma_y;
  const double scale = std::sqrt(noise / static_cast<double>(model.n));
  Rng rng(seed);
  double s_tot = 0, s_inf = 0, s_nui = 0, q_tot = 0, q_inf = 0, q_nui = 0;
  Vec v(model.n);
  for (int t = 0; t < draws; ++t) {
    for (Index i = 0; i < model.n; ++i) v(i) = e(i) + scale * rng.normal();
    const double tot = 0.5 * v.squaredNorm();
    const double inf = 0.5 * (model.U.transpose() * v).squaredNorm();
    const double nui = tot - inf;
    s_tot += tot; s_inf += inf; s_nui += nui;
    q_tot += tot * tot; q_inf += inf * inf; q_nui += nui * nui;
  }
  const double D = static_cast<double>(draws);
  auto se = [D](double s, double q) {
    const double mean = s / D;
    const double var = std::max(q / D - mean * mean, 0.0) * D / (D - 1.0);
    return std::sqrt(var / D);
  };
  PopulationLossEstimate out;
  out.mean = {s_tot / D, s_inf / D, s_nui / D};
  out.standard_error = {se(s_tot, q_tot), se(s_inf, q_inf), se(s_nui, q_nui)};
  return out;
}

std::vector<LinearGdRecord> linear_gd(const LinearCorruptedModel& model, double eta, int T) {
  require(T >= 0, ErrorCode::InvalidArgument, "T must be >= 0");
  require(eta >= 0.0 && std::isfinite(eta), ErrorCode::InvalidArgument, "eta must be >= 0");
  const double xn = opnorm(model.X);
  require(eta * xn * xn < 2.0, ErrorCode::StepSize, "eta >= 2 / ||X||^2 diverges");
  const Mat gram = model.X.transpose() * model.X;
  const Vec xty = model.X.transpose() * model.y;
  std::vector<LinearGdRecord> out;
  out.reserve(static_cast<std::size_t>(T) + 1);
  Vec w = Vec::Zero(model.d);
  for (int t = 0;; ++t) {
    out.push_back({t, w, linear_population_loss(model, w)});
    if (t == T) break;
    w = w - eta * (gram * w - xty);
  }
  return out;
}

MixtureSpec make_mixture_spec(Index K, Index C, Index d, double sigma, double min_center_distance,
                              Index n, std::uint64_t seed, int max_attempts) {
  require(K >= 1 && C >= 1 && d >= 1 && n >= 0, ErrorCode::InvalidArgument, "mixture sizes");
  require(sigma >= 0.0, ErrorCode::InvalidArgument, "sigma must be >= 0");
  require(min_center_distance >= 0.0, ErrorCode::InvalidArgument, "distance must be >= 0");
  Rng rng(seed);
  MixtureSpec spec;
  spec.K = K;
  spec.C = C;
  spec.sigma = sigma;
  spec.min_center_distance = min_center_distance;
  spec.n = n;
  const Index KC = K * C;
  spec.centers.resize(KC, d);
  int attempts = 0;
  for (Index c = 0; c < KC;) {
    require(attempts < max_attempts, ErrorCode::InfeasibleSpec,
            "could not place " + std::to_string(KC) + " centers at distance " +
                std::to_string(min_center_distance));
    ++attempts;
    const Vec cand = rng.unit_vector(d);
    bool ok = true;
    for (Index j = 0; j < c && ok; ++j)
      ok = (spec.centers.row(j).transpose() - cand).norm() >= min_center_distance;
    if (ok) spec.centers.row(c++) = cand.transpose();
  }
  return spec;
}

ClassificationDataset make_dataset(const Mat& X, const std::vector<int>& labels, Index K,
                                   std::vector<int> clusters) {
  const Index n = X.rows();
  require(static_cast<Index>(labels.size()) == n, ErrorCode::DimensionMismatch, "label count");
  require(clusters.empty() || static_cast<Index>(clusters.size()) == n,
          ErrorCode::DimensionMismatch, "cluster count");
  require(K >= 1, ErrorCode::InvalidArgument, "K must be >= 1");
  ClassificationDataset ds;
  ds.X = X;
  ds.labels = labels;
  ds.K = K;
  ds.clusters = std::move(clusters);
  ds.Y = Mat::Zero(n, K);
  ds.concat_y = Vec::Zero(n * K);
  for (Index i = 0; i < n; ++i) {
    const int l = labels[static_cast<std::size_t>(i)];
    require(l >= 0 && l < K, ErrorCode::InvalidArgument, "label out of range");
    ds.Y(i, l) = 1.0;
    ds.concat_y(l * n + i) = 1.0;
  }
  return ds;
}

ClassificationDataset gen_gmm(const MixtureSpec& spec, std::uint64_t seed, ClusterSampling mode) {
  const Index KC = spec.K * spec.C;
  require(spec.centers.rows() == KC, ErrorCode::DimensionMismatch, "center count");
  require(spec.n >= 1, ErrorCode::InvalidArgument, "n must be >= 1");
  if (mode == ClusterSampling::Balanced)
    require(spec.n % KC == 0, ErrorCode::InvalidArgument, "balanced sampling needs KC | n");
  const Index d = spec.centers.cols();
  const double scale = spec.sigma / std::sqrt(static_cast<double>(d));
  Rng rng(seed);
  Mat X(spec.n, d);
  std::vector<int> labels(spec.n), clusters(spec.n);
  for (Index i = 0; i < spec.n; ++i) {
    const int c = mode == ClusterSampling::Balanced ? static_cast<int>(i % KC)
                                                    : rng.uniform_int(0, static_cast<int>(KC) - 1);
    clusters[i] = c;
    labels[i] = c / static_cast<int>(spec.C);
    for (Index j = 0; j < d; ++j) X(i, j) = spec.centers(c, j) + scale * rng.normal();
  }
  require(X.allFinite(), ErrorCode::NonFinite, "generated mixture inputs");
  return make_dataset(X, labels, spec.K, clusters);
}

ClassificationDataset corrupt_labels(const ClassificationDataset& ds, double fraction,
                                     std::uint64_t seed) {
  require(fraction >= 0.0 && fraction <= 1.0, ErrorCode::InvalidArgument,
          "fraction must be in [0, 1]");
  const Index n = ds.n();
  const auto count = static_cast<Index>(std::llround(fraction * static_cast<double>(n)));
  if (count == 0) return ds;
  require(ds.K >= 2, ErrorCode::InvalidArgument, "cannot corrupt labels with a single class");
  Rng rng(seed);
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (Index t = 0; t < count; ++t) {
    const int j = rng.uniform_int(static_cast<int>(t), static_cast<int>(n) - 1);
    std::swap(idx[t], idx[j]);
  }
  std::vector<int> labels = ds.labels;
  for (Index t = 0; t < count; ++t) {
    const int i = idx[t];
    labels[i] = (labels[i] + rng.uniform_int(1, static_cast<int>(ds.K) - 1)) % static_cast<int>(ds.K);
  }
  return make_dataset(ds.X, labels, ds.K, ds.clusters);
}

int argmax_lowest(const Eigen::Ref<const Vec>& v) {
  int best = 0;
  for (Index i = 1; i < v.size(); ++i)
    if (v(i) > v(best)) best = static_cast<int>(i);
  return best;
}

double classification_error(const ShallowNet& net, const ClassificationDataset& ds) {
  require(net.K() == ds.K, ErrorCode::DimensionMismatch, "class count");
  const Index n = ds.n();
  if (n == 0) return 0.0;
  const Mat F = forward_matrix(net, ds.X);
  Index wrong = 0;
  for (Index i = 0; i < n; ++i) {
    const Vec yi = ds.Y.row(i).transpose();
    if (argmax_lowest(F.col(i)) != argmax_lowest(yi)) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(n);
}

Mat normalize_rows(const Mat& X) {
  Mat out = X;
  for (Index i = 0; i < X.rows(); ++i) {
    const double nrm = X.row(i).norm();
    require(nrm > 0.0, ErrorCode::InvalidArgument, "cannot normalize a zero row");
    out.row(i) /= nrm;
  }
  return out;
}

void save_dataset(const ClassificationDataset& ds, const std::string& csv_path,
                  const MixtureSpec* spec) {
  const Index d = ds.X.cols();
  std::vector<std::string> cols;
  for (Index j = 0; j < d; ++j) cols.push_back("x" + std::to_string(j));
  cols.push_back("label");
  cols.push_back("cluster");
  CsvTable table("ntks-dataset v1: inputs x0..x" + std::to_string(d - 1) +
                     ", class label, cluster index (-1 if unknown)",
                 cols);
  for (Index i = 0; i < ds.n(); ++i) {
    std::vector<double> row;
    for (Index j = 0; j < d; ++j) row.push_back(ds.X(i, j));
    row.push_back(ds.labels[i]);
    row.push_back(ds.clusters.empty() ? -1.0 : ds.clusters[i]);
    table.add_row(row);
  }
  nlohmann::json side;
  side["format"] = "ntks-dataset v1";
  side["K"] = ds.K;
  side["n"] = ds.n();
  side["d"] = d;
  if (spec != nullptr) {
    nlohmann::json s;
    s["K"] = spec->K;
    s["C"] = spec->C;
    s["sigma"] = spec->sigma;
    s["min_center_distance"] = spec->min_center_distance;
    s["n"] = spec->n;
    nlohmann::json centers = nlohmann::json::array();
    for (Index c = 0; c < spec->centers.rows(); ++c) {
      std::vector<double> row(spec->centers.cols());
      for (Index j = 0; j < spec->centers.cols(); ++j) row[j] = spec->centers(c, j);
      centers.push_back(row);
    }
    s["centers"] = centers;
    side["spec"] = s;
  }
  write_text_file(csv_path, table.str());
  write_text_file(csv_path + ".json", side.dump(2) + "\n");
}

ClassificationDataset load_dataset(const std::string& csv_path) {
  const nlohmann::json side = nlohmann::json::parse(read_text_file(csv_path + ".json"));
  const Index K = side.at("K").get<Index>();
  const Index d = side.at("d").get<Index>();
  const auto rows = parse_csv_numbers(read_text_file(csv_path));
  const Index n = static_cast<Index>(rows.size());
  require(side.at("n").get<Index>() == n, ErrorCode::Io, "row count disagrees with sidecar");
  Mat X(n, d);
  std::vector<int> labels(n), clusters(n);
  bool have_clusters = false;
  for (Index i = 0; i < n; ++i) {
    require(static_cast<Index>(rows[i].size()) == d + 2, ErrorCode::Io, "row width");
    for (Index j = 0; j < d; ++j) X(i, j) = rows[i][j];
    labels[i] = static_cast<int>(rows[i][d]);
    clusters[i] = static_cast<int>(rows[i][d + 1]);
    have_clusters = have_clusters || clusters[i] >= 0;
  }
  if (!have_clusters) clusters.clear();
  return make_dataset(X, labels, K, clusters);
}

}  // namespace ntks
