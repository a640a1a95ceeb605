#include "ntks/cli/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "ntks/io.hpp"
#include "ntks/ntk.hpp"
#include "ntks/rng.hpp"

namespace ntks::cli {

namespace {

using DecompPtr = std::shared_ptr<const SpectralDecomposition>;

double default_nu(double zeta, double B, Index K) {
  return zeta / (50.0 * B * std::sqrt(std::log(2.0 * static_cast<double>(K))));
}

Index default_gap_search(Index K, Index C) { return K * K * C + 1; }

InfoNuisanceSplit split_at_rank(const DecompPtr& d, Index r) {
  const Index m = d->singular_values.size();
  require(r >= 1 && r <= m, ErrorCode::InvalidArgument,
          "rank " + std::to_string(r) + " outside [1, " + std::to_string(m) + "]");
  const double cutoff = d->singular_values(r - 1);
  require(cutoff > 0.0, ErrorCode::InvalidCutoff, "singular value at the requested rank is zero");
  return split_at_cutoff(d, cutoff);
}

DecompPtr jacobian_decomposition(const ShallowNet& net, const Mat& X) {
  return std::make_shared<const SpectralDecomposition>(
      gram_decomposition(empirical_kernel(net, X)));
}

// Spectrum of (I_K (x) Sigma~)^{1/2}: eigenvectors of the clamped multiclass
// kernel with singular values sqrt(eigenvalue).
DecompPtr kernel_sqrt_decomposition(const KernelMatrix& km) {
  KernelMatrix clamped = km;
  clamped.base = clamp_psd(km.base);
  return std::make_shared<const SpectralDecomposition>(
      gram_decomposition(multiclass_kernel(clamped)));
}

ClusterSampling sampling(bool balanced) {
  return balanced ? ClusterSampling::Balanced : ClusterSampling::Iid;
}

void check_activation(const std::string& name) {
  check_one_of("activation", name, {"softplus", "identity", "tanh"});
}

std::string csv_schema(const std::string& name) { return "ntk-spectra " + name + " v1"; }

json loss_json(const PopulationLoss& l) {
  return {{"total", l.total}, {"info", l.info}, {"nuisance", l.nuisance}};
}

bool nondecreasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] < v[i - 1]) return false;
  return true;
}

json check_json(const InequalityCheck& c) {
  return {{"measured", c.measured}, {"bound", c.bound}, {"slack", c.slack}, {"holds", c.holds}};
}

}  // namespace

std::string dump_json(const json& j) { return j.dump(2) + "\n"; }

double median(std::vector<double> v) {
  require(!v.empty(), ErrorCode::InvalidArgument, "median of empty set");
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

// ---------------------------------------------------------------- linear_demo

LinearDemoParams parse_linear_demo(ConfigReader& c) {
  LinearDemoParams p;
  p.seed = c.seed();
  p.n = c.integer("n", p.n);
  p.d = c.integer("d", p.d);
  p.r = c.integer("r", p.r);
  p.sigma_x = c.number("sigma_x", p.sigma_x);
  p.sigma_y = c.number("sigma_y", p.sigma_y);
  p.w_star_norm = c.number("w_star_norm", p.w_star_norm);
  p.eta_scale = c.number("eta_scale", p.eta_scale);
  if (c.has("eta")) p.eta = c.number("eta", 0.0);
  p.T = static_cast<int>(c.integer("T", p.T));
  p.mc_draws = static_cast<int>(c.integer("mc_draws", p.mc_draws));
  p.stride = static_cast<int>(c.integer("stride", p.stride));

  check_min("n", p.n, 1);
  check_min("d", p.d, 1);
  check_range("r", static_cast<double>(p.r), 1.0, static_cast<double>(std::min(p.n, p.d)));
  check_nonnegative("sigma_x", p.sigma_x);
  check_nonnegative("sigma_y", p.sigma_y);
  check_positive("w_star_norm", p.w_star_norm);
  require(p.eta_scale > 0.0 && p.eta_scale < 2.0, ErrorCode::InvalidArgument,
          "eta_scale must lie in (0, 2)");
  if (p.eta) check_positive("eta", *p.eta);
  check_range("T", p.T, 0, 10000000);
  check_min("mc_draws", p.mc_draws, 2);
  check_min("stride", p.stride, 1);
  return p;
}

LinearDemoResult run_linear_demo(const LinearDemoParams& p) {
  LinearDemoResult out;
  out.params = p;
  const LinearCorruptedModel model =
      gen_linear_model(p.n, p.d, p.r, p.sigma_x, p.sigma_y, derive_seed(p.seed, 1), p.w_star_norm);
  out.opnorm_X = opnorm(model.X);
  out.eta = p.eta ? *p.eta : p.eta_scale / (out.opnorm_X * out.opnorm_X);
  require(std::isfinite(out.eta) && out.eta > 0.0, ErrorCode::NonFinite,
          "derived step size " + fmt17(out.eta) + " is not positive and finite");
  const std::vector<LinearGdRecord> gd = linear_gd(model, out.eta, p.T);

  std::vector<double> total, info, nuis;
  for (const auto& rec : gd) {
    total.push_back(rec.loss.total);
    info.push_back(rec.loss.info);
    nuis.push_back(rec.loss.nuisance);
    if (rec.iter % p.stride != 0 && rec.iter != p.T) continue;
    LinearDemoRow row;
    row.iter = rec.iter;
    row.exact = rec.loss;
    const PopulationLossEstimate mc = linear_population_loss_mc(
        model, rec.w, p.mc_draws, derive_seed(derive_seed(p.seed, 2), rec.iter));
    row.mc = mc.mean;
    row.mc_stderr = mc.standard_error;
    out.rows.push_back(row);
  }

  const auto argmin = [](const std::vector<double>& v) {
    return static_cast<int>(std::min_element(v.begin(), v.end()) - v.begin());
  };
  out.tau_star = argmin(total);
  out.info_argmin = argmin(info);
  out.dip = out.tau_star > 0 && out.tau_star < p.T;
  const int ts = out.tau_star;
  out.info_decreasing_before = true;
  for (int t = 0; t < ts; ++t) out.info_decreasing_before &= info[t + 1] < info[t];
  out.nuisance_increasing_after = true;
  out.info_decreasing_after = true;
  for (int t = ts; t < p.T; ++t) {
    out.nuisance_increasing_after &= nuis[t + 1] > nuis[t];
    out.info_decreasing_after &= info[t + 1] < info[t];
  }
  return out;
}

FileSet render(const LinearDemoResult& r) {
  CsvTable csv(csv_schema("linear_demo"),
               {"iter", "total", "info", "nuisance", "total_mc", "info_mc", "nuisance_mc",
                "total_mc_stderr", "info_mc_stderr", "nuisance_mc_stderr"});
  for (const auto& row : r.rows)
    csv.add_row({static_cast<double>(row.iter), row.exact.total, row.exact.info,
                 row.exact.nuisance, row.mc.total, row.mc.info, row.mc.nuisance,
                 row.mc_stderr.total, row.mc_stderr.info, row.mc_stderr.nuisance});
  const LinearDemoParams& p = r.params;
  json s = {{"command", "linear_demo"},
            {"seed", p.seed},
            {"n", p.n},
            {"d", p.d},
            {"r", p.r},
            {"sigma_x", p.sigma_x},
            {"sigma_y", p.sigma_y},
            {"eta", r.eta},
            {"opnorm_X", r.opnorm_X},
            {"T", p.T},
            {"mc_draws", p.mc_draws},
            {"tau_star", r.tau_star},
            {"dip", r.dip},
            {"info_argmin", r.info_argmin},
            {"info_decreasing_before_tau_star", r.info_decreasing_before},
            {"nuisance_increasing_after_tau_star", r.nuisance_increasing_after},
            {"info_decreasing_after_tau_star", r.info_decreasing_after}};
  for (const auto& row : r.rows)
    if (row.iter == r.tau_star) s["loss_at_tau_star"] = loss_json(row.exact);
  if (!r.rows.empty()) {
    s["loss_initial"] = loss_json(r.rows.front().exact);
    s["loss_final"] = loss_json(r.rows.back().exact);
  }
  return {{"linear_demo.csv", csv.str()}, {"linear_demo_summary.json", dump_json(s)}};
}

// --------------------------------------------------------------- gmm_spectrum

GmmSpectrumParams parse_gmm_spectrum(ConfigReader& c) {
  GmmSpectrumParams p;
  p.seed = c.seed();
  p.K = c.integer("K", p.K);
  p.C = c.integer("C", p.C);
  p.d = c.integer("d", p.d);
  p.k = c.integer("k", p.k);
  p.sigma = c.number("sigma", p.sigma);
  p.min_dist = c.number("min_dist", p.min_dist);
  p.n_per_cluster_count = c.integers("n_multipliers", p.n_per_cluster_count);
  p.zeta = c.number("zeta", p.zeta);
  if (c.has("nu")) p.nu = c.number("nu", 0.0);
  p.num_seeds = static_cast<int>(c.integer("num_seeds", p.num_seeds));
  p.balanced = c.boolean("balanced", p.balanced);
  p.activation = c.text("activation", p.activation);
  p.kernel_samples = static_cast<int>(c.integer("kernel_samples", p.kernel_samples));
  p.rank_tol = c.number("rank_tol", p.rank_tol);

  check_min("K", p.K, 1);
  check_min("C", p.C, 1);
  check_min("d", p.d, 1);
  check_min("k", p.k, 1);
  check_nonnegative("sigma", p.sigma);
  check_nonnegative("min_dist", p.min_dist);
  for (long long m : p.n_per_cluster_count) {
    check_min("n_multipliers", m, 1);
    if (p.balanced)
      require((m * p.C) % (p.K * p.C) == 0, ErrorCode::InvalidArgument,
              "balanced sampling needs K C to divide every n = multiplier * C");
  }
  check_positive("zeta", p.zeta);
  if (p.nu) check_positive("nu", *p.nu);
  check_min("num_seeds", p.num_seeds, 1);
  check_activation(p.activation);
  check_min("kernel_samples", p.kernel_samples, 1);
  check_positive("rank_tol", p.rank_tol);
  return p;
}

GmmSpectrumResult run_gmm_spectrum(const GmmSpectrumParams& p) {
  GmmSpectrumResult out;
  out.params = p;
  const Activation act = Activation::parse(p.activation);
  out.nu = p.nu ? *p.nu : default_nu(p.zeta, act.B, p.K);
  const Index KC = p.K * p.C;
  const std::size_t nm = p.n_per_cluster_count.size();

  for (int s = 0; s < p.num_seeds; ++s) {
    const std::uint64_t rs = derive_seed(p.seed, static_cast<std::uint64_t>(s));
    MixtureSpec spec = make_mixture_spec(p.K, p.C, p.d, p.sigma, p.min_dist,
                                         p.n_per_cluster_count.front() * p.C, derive_seed(rs, 1));
    std::vector<double> top_norm, top_raw;
    for (std::size_t idx = 0; idx < nm; ++idx) {
      spec.n = p.n_per_cluster_count[idx] * p.C;
      const ClassificationDataset ds = gen_gmm(spec, derive_seed(rs, 2 + idx), sampling(p.balanced));
      const ShallowNet net = init_random(p.k, p.d, p.K, out.nu, derive_seed(rs, 100 + idx), act);

      GmmSpectrumRun run;
      run.seed_index = s;
      run.n = spec.n;
      run.singular_raw = jacobian_decomposition(net, ds.X)->singular_values;
      run.singular_normalized =
          run.singular_raw * std::sqrt(static_cast<double>(KC) / static_cast<double>(spec.n));

      const std::uint64_t kernel_seed = derive_seed(rs, 200 + idx);
      const KernelMatrix km = mc_kernel(ds.X, act, p.kernel_samples, kernel_seed, p.K);
      Vec base_eig;
      symmetric_eigen(km.base, base_eig);
      const Index n = spec.n;
      run.kernel_eigenvalues.resize(p.K * n);
      for (Index i = 0; i < n; ++i)
        for (Index l = 0; l < p.K; ++l) run.kernel_eigenvalues(i * p.K + l) = base_eig(n - 1 - i);
      const double top = run.kernel_eigenvalues(0);
      run.kernel_rank = (run.kernel_eigenvalues.array() > p.rank_tol * top).count();

      if (p.balanced && p.sigma == 0.0) {
        // Same seed, same dimension: the center kernel sees the same weight draws.
        const KernelMatrix kc = mc_kernel(spec.centers, act, p.kernel_samples, kernel_seed, p.K);
        Vec center_eig;
        symmetric_eigen(kc.base, center_eig);
        const double per_cluster = static_cast<double>(n / KC);
        double worst = 0.0;
        for (Index i = 0; i < KC; ++i) {
          const double expected = per_cluster * center_eig(KC - 1 - i);
          const double got = base_eig(n - 1 - i);
          worst = std::max(worst, std::abs(got - expected) / std::abs(expected));
        }
        run.identity_rel_error = worst;
      }

      const Index top_count = std::min<Index>(KC, run.singular_raw.size());
      std::vector<double> tn, tr;
      for (Index i = 0; i < top_count; ++i) {
        tn.push_back(run.singular_normalized(i));
        tr.push_back(run.singular_raw(i));
      }
      top_norm.push_back(median(tn));
      top_raw.push_back(median(tr));
      out.runs.push_back(std::move(run));
    }
    out.ratio_normalized_per_seed.push_back(top_norm.back() / top_norm.front());
    out.ratio_raw_per_seed.push_back(top_raw.back() / top_raw.front());
  }
  out.ratio_normalized = median(out.ratio_normalized_per_seed);
  out.ratio_raw = median(out.ratio_raw_per_seed);
  return out;
}

FileSet render(const GmmSpectrumResult& r) {
  CsvTable sv(csv_schema("gmm_spectrum singular values"),
              {"seed_index", "n", "index", "singular_normalized", "singular_raw"});
  CsvTable ke(csv_schema("gmm_spectrum kernel eigenvalues"),
              {"seed_index", "n", "index", "eigenvalue"});
  json runs = json::array();
  for (const auto& run : r.runs) {
    for (Index i = 0; i < run.singular_raw.size(); ++i)
      sv.add_row({static_cast<double>(run.seed_index), static_cast<double>(run.n),
                  static_cast<double>(i), run.singular_normalized(i), run.singular_raw(i)});
    for (Index i = 0; i < run.kernel_eigenvalues.size(); ++i)
      ke.add_row({static_cast<double>(run.seed_index), static_cast<double>(run.n),
                  static_cast<double>(i), run.kernel_eigenvalues(i)});
    json j = {{"seed_index", run.seed_index},
              {"n", run.n},
              {"kernel_rank", run.kernel_rank},
              {"top_singular_normalized", run.singular_normalized(0)},
              {"top_singular_raw", run.singular_raw(0)}};
    if (run.identity_rel_error) j["cluster_identity_rel_error"] = *run.identity_rel_error;
    runs.push_back(j);
  }
  const GmmSpectrumParams& p = r.params;
  json s = {{"command", "gmm_spectrum"},
            {"seed", p.seed},
            {"K", p.K},
            {"C", p.C},
            {"sigma", p.sigma},
            {"k", p.k},
            {"nu", r.nu},
            {"n_multipliers", p.n_per_cluster_count},
            {"expected_kernel_rank", p.K * p.K * p.C},
            {"runs", runs},
            {"top_KC_ratio_normalized_per_seed", r.ratio_normalized_per_seed},
            {"top_KC_ratio_raw_per_seed", r.ratio_raw_per_seed},
            {"top_KC_ratio_normalized", r.ratio_normalized},
            {"top_KC_ratio_raw", r.ratio_raw}};
  return {{"gmm_spectrum_singular_values.csv", sv.str()},
          {"gmm_spectrum_kernel_eigenvalues.csv", ke.str()},
          {"gmm_spectrum_summary.json", dump_json(s)}};
}

// ---------------------------------------------------------------- train_track

GmmTrainParams parse_gmm_train(ConfigReader& c, const GmmTrainParams& defaults) {
  GmmTrainParams p = defaults;
  p.seed = c.seed();
  p.K = c.integer("K", p.K);
  p.C = c.integer("C", p.C);
  p.d = c.integer("d", p.d);
  p.n = c.integer("n", p.n);
  p.n_test = c.integer("n_test", p.n_test);
  p.k = c.integer("k", p.k);
  p.sigma = c.number("sigma", p.sigma);
  p.min_dist = c.number("min_dist", p.min_dist);
  p.balanced = c.boolean("balanced", p.balanced);
  p.normalize_inputs = c.boolean("normalize_inputs", p.normalize_inputs);
  p.zeta = c.number("zeta", p.zeta);
  if (c.has("nu")) p.nu = c.number("nu", 0.0);
  p.gamma = c.number("gamma", p.gamma);
  p.eta_scale = c.number("eta_scale", p.eta_scale);
  if (c.has("T")) p.T = static_cast<int>(c.integer("T", 0));
  p.max_iters = static_cast<int>(c.integer("max_iters", p.max_iters));
  p.split_source = c.text("split_source", p.split_source);
  if (c.has("rank")) p.rank = c.integer("rank", 0);
  if (c.has("gap_search")) p.gap_search = c.integer("gap_search", 0);
  p.activation = c.text("activation", p.activation);
  p.kernel_samples = static_cast<int>(c.integer("kernel_samples", p.kernel_samples));
  p.stride = static_cast<int>(c.integer("stride", p.stride));
  p.corruption = c.number("corruption", p.corruption);
  validate(p);
  return p;
}

void validate(const GmmTrainParams& p) {
  check_min("K", p.K, 1);
  check_min("C", p.C, 1);
  check_min("d", p.d, 1);
  check_min("n", p.n, 1);
  check_min("n_test", p.n_test, 1);
  check_min("k", p.k, 1);
  check_nonnegative("sigma", p.sigma);
  check_nonnegative("min_dist", p.min_dist);
  if (p.balanced)
    require(p.n % (p.K * p.C) == 0, ErrorCode::InvalidArgument,
            "balanced sampling needs K C to divide n");
  check_positive("zeta", p.zeta);
  if (p.nu) check_positive("nu", *p.nu);
  require(p.gamma >= 1.0, ErrorCode::InvalidArgument, "gamma must be >= 1");
  require(p.eta_scale > 0.0 && p.eta_scale <= 1.0, ErrorCode::InvalidArgument,
          "eta_scale must lie in (0, 1]");
  if (p.T) check_range("T", *p.T, 0, p.max_iters);
  check_min("max_iters", p.max_iters, 0);
  check_one_of("split_source", p.split_source,
               {"kernel_sqrt", "initial_jacobian", "final_jacobian"});
  if (p.rank) check_range("rank", static_cast<double>(*p.rank), 1.0, static_cast<double>(p.K * p.n));
  if (p.gap_search) check_min("gap_search", *p.gap_search, 1);
  check_activation(p.activation);
  check_min("kernel_samples", p.kernel_samples, 1);
  check_min("stride", p.stride, 1);
  check_range("corruption", p.corruption, 0.0, 1.0);
}

TrainTrackResult run_train_track(const GmmTrainParams& p) {
  validate(p);
  TrainTrackResult out;
  out.params = p;
  const Activation act = Activation::parse(p.activation);

  const MixtureSpec spec =
      make_mixture_spec(p.K, p.C, p.d, p.sigma, p.min_dist, p.n, derive_seed(p.seed, 1));
  ClassificationDataset ds = gen_gmm(spec, derive_seed(p.seed, 2), sampling(p.balanced));
  MixtureSpec test_spec = spec;
  test_spec.n = p.n_test;
  ClassificationDataset test = gen_gmm(test_spec, derive_seed(p.seed, 3));
  if (p.normalize_inputs) {
    ds.X = normalize_rows(ds.X);
    test.X = normalize_rows(test.X);
  }
  if (p.corruption > 0.0) ds = corrupt_labels(ds, p.corruption, derive_seed(p.seed, 4));

  out.nu = p.nu ? *p.nu : default_nu(p.zeta, act.B, p.K);
  const ShallowNet net = init_random(p.k, p.d, p.K, out.nu, derive_seed(p.seed, 5), act);
  out.opnorm_X = opnorm(ds.X);
  out.eta = p.eta_scale / std::pow(out.nu * act.B * out.opnorm_X, 2);
  require(std::isfinite(out.eta) && out.eta > 0.0, ErrorCode::NonFinite,
          "derived step size " + fmt17(out.eta) + " is not positive and finite");
  const Vec& y = ds.concat_y;
  const Vec r0 = forward_concat(net, ds.X) - y;
  const Index search = p.gap_search ? *p.gap_search : default_gap_search(p.K, p.C);

  const DecompPtr j0 = jacobian_decomposition(net, ds.X);
  out.jacobian_rank = p.rank ? *p.rank : gap_rank(j0->singular_values, search);
  const InfoNuisanceSplit j0_split = split_at_rank(j0, out.jacobian_rank);
  out.alignment_initial = alignment_metrics(j0_split, y, r0);

  std::optional<InfoNuisanceSplit> tracked;
  double T_default = 0.0;
  if (p.split_source == "kernel_sqrt") {
    const KernelMatrix km = mc_kernel(ds.X, act, p.kernel_samples, derive_seed(p.seed, 6), p.K);
    const DecompPtr kd = kernel_sqrt_decomposition(km);
    const Index kr = p.rank ? *p.rank : gap_rank(kd->singular_values, search);
    tracked = split_at_rank(kd, kr);
    const double a0 = tracked->cutoff;
    T_default = std::ceil(p.gamma * static_cast<double>(p.K) /
                          (out.eta * out.nu * out.nu * a0 * a0));
  } else {
    T_default = std::ceil(p.gamma / (out.eta * j0_split.cutoff * j0_split.cutoff));
    if (p.split_source == "initial_jacobian") tracked = j0_split;
  }
  if (p.T) {
    out.T = *p.T;
  } else {
    require(T_default <= p.max_iters, ErrorCode::InvalidArgument,
            "stopping time " + fmt17(T_default) + " exceeds max_iters");
    out.T = static_cast<int>(T_default);
  }

  std::vector<Vec> residuals;
  std::vector<std::pair<double, double>> errors;
  TrainOptions opts;
  opts.stride = p.stride;
  opts.observers.push_back([&](int, const ShallowNet& cur, const Vec& r) {
    residuals.push_back(r);
    errors.emplace_back(classification_error(cur, ds), classification_error(cur, test));
  });
  const auto [final_net, log] = train(net, ds.X, y, out.eta, out.T, opts);

  if (out.T > 0) {
    const DecompPtr jT = jacobian_decomposition(final_net, ds.X);
    const InfoNuisanceSplit jT_split = split_at_rank(jT, out.jacobian_rank);
    out.alignment_final = alignment_metrics(jT_split, y, r0);
    if (p.split_source == "final_jacobian") tracked = jT_split;
  } else if (p.split_source == "final_jacobian") {
    tracked = j0_split;
  }
  out.rank = tracked->rank;
  out.cutoff = tracked->cutoff;

  for (std::size_t i = 0; i < log.records.size(); ++i) {
    const TrajectoryRecord& rec = log.records[i];
    TrackRow row;
    row.iter = rec.iter;
    row.loss = rec.loss;
    row.residual = rec.residual_norm;
    row.proj_info = project(*tracked, residuals[i], Subspace::Info).norm();
    row.proj_nuisance = project(*tracked, residuals[i], Subspace::Nuisance).norm();
    row.dist_fro = rec.dist_fro;
    row.dist_2inf = rec.dist_2inf;
    row.train_err = errors[i].first;
    row.test_err = errors[i].second;
    out.rows.push_back(row);
  }
  const TrackRow& first = out.rows.front();
  const TrackRow& last = out.rows.back();
  out.info_ratio_sq = std::pow(last.proj_info / first.proj_info, 2);
  out.nuisance_ratio_sq = std::pow(last.proj_nuisance / first.proj_nuisance, 2);
  out.final_train_err = last.train_err;
  out.final_test_err = last.test_err;
  return out;
}

FileSet render(const TrainTrackResult& r) {
  CsvTable csv(csv_schema("train_track"),
               {"iter", "loss", "residual", "proj_info", "proj_nuisance", "dist_fro",
                "dist_2inf", "train_err", "test_err"});
  for (const auto& row : r.rows)
    csv.add_row({static_cast<double>(row.iter), row.loss, row.residual, row.proj_info,
                 row.proj_nuisance, row.dist_fro, row.dist_2inf, row.train_err, row.test_err});
  json align = {{"initial", to_json(r.alignment_initial)}};
  if (r.alignment_final) align["final"] = to_json(*r.alignment_final);
  align["jacobian_rank"] = r.jacobian_rank;
  const GmmTrainParams& p = r.params;
  json s = {{"command", "train_track"},
            {"seed", p.seed},
            {"K", p.K},
            {"C", p.C},
            {"n", p.n},
            {"k", p.k},
            {"sigma", p.sigma},
            {"corruption", p.corruption},
            {"split_source", p.split_source},
            {"nu", r.nu},
            {"eta", r.eta},
            {"opnorm_X", r.opnorm_X},
            {"T", r.T},
            {"rank", r.rank},
            {"cutoff", r.cutoff},
            {"info_ratio_sq", r.info_ratio_sq},
            {"nuisance_ratio_sq", r.nuisance_ratio_sq},
            {"final_train_err", r.final_train_err},
            {"final_test_err", r.final_test_err}};
  return {{"train_track.csv", csv.str()},
          {"alignment_metrics.json", dump_json(align)},
          {"train_track_summary.json", dump_json(s)}};
}

// -------------------------------------------------------------- corrupt_sweep

GmmTrainParams corrupt_sweep_defaults() {
  GmmTrainParams d;
  d.K = 10;
  d.C = 1;
  d.n = 200;
  d.n_test = 500;
  d.k = 500;
  d.split_source = "initial_jacobian";
  d.stride = 1000000;  // only the endpoints are needed
  return d;
}

CorruptSweepParams parse_corrupt_sweep(ConfigReader& c) {
  CorruptSweepParams p;
  p.fractions = c.numbers("fractions", p.fractions);
  p.num_seeds = static_cast<int>(c.integer("num_seeds", p.num_seeds));
  require(!c.has("corruption"), ErrorCode::InvalidArgument,
          "corrupt_sweep takes fractions, not corruption");
  p.base = parse_gmm_train(c, corrupt_sweep_defaults());
  for (double f : p.fractions) check_range("fractions", f, 0.0, 1.0);
  check_min("num_seeds", p.num_seeds, 1);
  return p;
}

CorruptSweepResult run_corrupt_sweep(const CorruptSweepParams& p) {
  CorruptSweepResult out;
  out.params = p;
  std::vector<double> med_nuis, med_err;
  for (double f : p.fractions) {
    std::vector<double> ni, nf, te;
    for (int s = 0; s < p.num_seeds; ++s) {
      GmmTrainParams run = p.base;
      run.seed = p.base.seed + static_cast<std::uint64_t>(s);
      run.corruption = f;
      const TrainTrackResult tr = run_train_track(run);
      SweepRow row;
      row.fraction = f;
      row.seed = run.seed;
      row.y_nuisance_initial = tr.alignment_initial.y_nuisance;
      row.y_nuisance_final =
          tr.alignment_final ? tr.alignment_final->y_nuisance : row.y_nuisance_initial;
      row.test_err = tr.final_test_err;
      row.train_err = tr.final_train_err;
      row.rank = tr.jacobian_rank;
      row.T = tr.T;
      ni.push_back(row.y_nuisance_initial);
      nf.push_back(row.y_nuisance_final);
      te.push_back(row.test_err);
      out.rows.push_back(row);
    }
    out.summary.push_back({f, median(ni), median(nf), median(te)});
    med_nuis.push_back(out.summary.back().y_nuisance_initial);
    med_err.push_back(out.summary.back().test_err);
  }
  out.nuisance_nondecreasing = nondecreasing(med_nuis);
  out.test_err_nondecreasing = nondecreasing(med_err);
  return out;
}

FileSet render(const CorruptSweepResult& r) {
  CsvTable rows(csv_schema("corrupt_sweep runs"),
                {"fraction", "seed", "y_nuisance_initial", "y_nuisance_final", "test_err",
                 "train_err", "rank", "T"});
  for (const auto& row : r.rows)
    rows.add_row({row.fraction, static_cast<double>(row.seed), row.y_nuisance_initial,
                  row.y_nuisance_final, row.test_err, row.train_err,
                  static_cast<double>(row.rank), static_cast<double>(row.T)});
  CsvTable summary(csv_schema("corrupt_sweep medians"),
                   {"fraction", "y_nuisance_initial", "y_nuisance_final", "test_err"});
  for (const auto& s : r.summary)
    summary.add_row({s.fraction, s.y_nuisance_initial, s.y_nuisance_final, s.test_err});
  json s = {{"command", "corrupt_sweep"},
            {"seed", r.params.base.seed},
            {"num_seeds", r.params.num_seeds},
            {"fractions", r.params.fractions},
            {"y_nuisance_nondecreasing", r.nuisance_nondecreasing},
            {"test_err_nondecreasing", r.test_err_nondecreasing}};
  return {{"corrupt_sweep.csv", summary.str()},
          {"corrupt_sweep_runs.csv", rows.str()},
          {"corrupt_sweep_summary.json", dump_json(s)}};
}

// ---------------------------------------------------------------- meta_verify

MetaVerifyParams parse_meta_verify(ConfigReader& c) {
  MetaVerifyParams p;
  p.seed = c.seed();
  p.K = c.integer("K", p.K);
  p.C = c.integer("C", p.C);
  p.d = c.integer("d", p.d);
  p.n = c.integer("n", p.n);
  p.k = c.integer("k", p.k);
  p.sigma = c.number("sigma", p.sigma);
  p.min_dist = c.number("min_dist", p.min_dist);
  p.normalize_inputs = c.boolean("normalize_inputs", p.normalize_inputs);
  p.nu = c.number("nu", p.nu);
  p.gamma = c.number("gamma", p.gamma);
  p.delta = c.number("delta", p.delta);
  if (c.has("eta")) p.eta = c.number("eta", 0.0);
  if (c.has("alpha")) p.alpha = c.number("alpha", 0.0);
  if (c.has("gap_search")) p.gap_search = c.integer("gap_search", 0);
  p.activation = c.text("activation", p.activation);
  p.probes = static_cast<int>(c.integer("probes", p.probes));
  p.stride = static_cast<int>(c.integer("stride", p.stride));
  p.max_iters = static_cast<int>(c.integer("max_iters", p.max_iters));

  check_min("K", p.K, 1);
  check_min("C", p.C, 1);
  check_min("d", p.d, 1);
  check_min("n", p.n, 1);
  check_min("k", p.k, 1);
  check_nonnegative("sigma", p.sigma);
  check_nonnegative("min_dist", p.min_dist);
  check_positive("nu", p.nu);
  require(p.gamma >= 1.0, ErrorCode::InvalidArgument, "gamma must be >= 1");
  require(p.delta > 0.0 && p.delta <= 1.0, ErrorCode::InvalidArgument, "delta must be in (0, 1]");
  if (p.eta) check_positive("eta", *p.eta);
  if (p.alpha) check_positive("alpha", *p.alpha);
  if (p.gap_search) check_min("gap_search", *p.gap_search, 1);
  check_activation(p.activation);
  check_min("probes", p.probes, 0);
  check_min("stride", p.stride, 1);
  check_min("max_iters", p.max_iters, 0);
  return p;
}

MetaVerifyResult run_meta_verify(const MetaVerifyParams& p) {
  MetaVerifyResult out;
  out.params = p;
  const Activation act = Activation::parse(p.activation);
  const MixtureSpec spec =
      make_mixture_spec(p.K, p.C, p.d, p.sigma, p.min_dist, p.n, derive_seed(p.seed, 1));
  ClassificationDataset ds = gen_gmm(spec, derive_seed(p.seed, 2));
  if (p.normalize_inputs) ds.X = normalize_rows(ds.X);
  const ShallowNet net = init_random(p.k, p.d, p.K, p.nu, derive_seed(p.seed, 5), act);

  out.opnorm_X = opnorm(ds.X);
  // Spectral Jacobian bound for |V| entries nu / sqrt(kK).
  const double beta = p.nu * act.B * out.opnorm_X;
  const double eta = p.eta ? *p.eta : 1.0 / (beta * beta);
  require(std::isfinite(eta) && eta > 0.0, ErrorCode::NonFinite,
          "derived step size " + fmt17(eta) + " is not positive and finite");
  require(eta * beta * beta <= 1.0 + 1e-12, ErrorCode::StepSize,
          "eta " + fmt17(eta) + " exceeds 1 / beta^2 = " + fmt17(1.0 / (beta * beta)));

  const ReferenceJacobian ref = make_reference(jacobian_dense(net, ds.X), beta);
  double alpha = 0.0;
  if (p.alpha) {
    alpha = *p.alpha;
  } else {
    const Vec& lam = ref.decomposition->singular_values;
    const Index search = p.gap_search ? *p.gap_search : default_gap_search(p.K, p.C);
    alpha = lam(gap_rank(lam, search) - 1);
  }
  require(alpha > 0.0, ErrorCode::InvalidCutoff, "alpha must be positive");
  const int T = stopping_time(p.gamma, eta, alpha);
  require(T <= p.max_iters, ErrorCode::InvalidArgument,
          "stopping time " + std::to_string(T) + " exceeds max_iters");

  CoupledOptions opts;
  opts.probes = p.probes;
  opts.probe_seed = derive_seed(p.seed, 8);
  opts.stride = p.stride;
  out.run = coupled_run(net, ds.X, ds.concat_y, ref, alpha, p.gamma, eta, p.delta, opts);
  return out;
}

json to_json(const CoupledReport& r) {
  return {{"eta", r.eta},
          {"alpha", r.alpha},
          {"gamma", r.gamma},
          {"delta", r.delta},
          {"beta", r.beta},
          {"T", r.T},
          {"rank", r.rank},
          {"r0_norm", r.r0_norm},
          {"r0_info", r.r0_info},
          {"r0_nuisance", r.r0_nuisance},
          {"pinv_r0", r.pinv_r0},
          {"radius", r.radius},
          {"residual_coupling", check_json(r.residual_coupling)},
          {"param_coupling", check_json(r.param_coupling)},
          {"distance", check_json(r.distance)},
          {"final_residual", check_json(r.final_residual)},
          {"all_hold", r.all_hold()},
          {"hypotheses",
           {{"eps0", r.eps0},
            {"eps_probe", r.eps_probe},
            {"eps_path", r.eps_path},
            {"eps0_limit", r.eps0_limit},
            {"eps_limit", r.eps_limit},
            {"verified", r.hypotheses_verified},
            {"one_step_violations", r.one_step_violations}}}};
}

FileSet render(const MetaVerifyResult& r) {
  CsvTable csv(csv_schema("meta_verify"),
               {"iter", "residual", "linear_residual", "coupling_gap", "param_gap",
                "dist_from_init", "proj_info", "proj_nuisance", "jacobian_drift"});
  for (const auto& rec : r.run.records)
    csv.add_row({static_cast<double>(rec.iter), rec.residual, rec.linear_residual,
                 rec.coupling_gap, rec.param_gap, rec.dist_from_init, rec.proj_info,
                 rec.proj_nuisance, rec.jacobian_drift});
  json s = to_json(r.run.report);
  s["command"] = "meta_verify";
  s["seed"] = r.params.seed;
  s["activation"] = r.params.activation;
  s["k"] = r.params.k;
  s["n"] = r.params.n;
  s["nu"] = r.params.nu;
  s["opnorm_X"] = r.opnorm_X;
  return {{"meta_verify.csv", csv.str()}, {"meta_verify.json", dump_json(s)}};
}

// ----------------------------------------------------------------- bound_eval

BoundEvalParams parse_bound_eval(ConfigReader& c) {
  BoundEvalParams p;
  p.seed = c.seed();
  p.K = c.integer("K", p.K);
  p.C = c.integer("C", p.C);
  p.d = c.integer("d", p.d);
  p.n = c.integer("n", p.n);
  p.k = c.integer("k", p.k);
  p.sigma = c.number("sigma", p.sigma);
  p.min_dist = c.number("min_dist", p.min_dist);
  p.balanced = c.boolean("balanced", p.balanced);
  p.zeta = c.number("zeta", p.zeta);
  p.gamma = c.number("gamma", p.gamma);
  p.delta = c.number("delta", p.delta);
  p.alpha0 = c.text("alpha0", p.alpha0);
  if (c.has("gap_search")) p.gap_search = c.integer("gap_search", 0);
  p.activation = c.text("activation", p.activation);
  p.kernel_samples = static_cast<int>(c.integer("kernel_samples", p.kernel_samples));
  if (c.has("C_r")) p.C_r = c.number("C_r", 0.0);
  p.width_c = c.number("width_c", p.width_c);

  check_min("K", p.K, 1);
  check_min("C", p.C, 1);
  check_min("d", p.d, 1);
  check_min("n", p.n, 1);
  check_min("k", p.k, 1);
  check_nonnegative("sigma", p.sigma);
  check_nonnegative("min_dist", p.min_dist);
  if (p.balanced)
    require(p.n % (p.K * p.C) == 0, ErrorCode::InvalidArgument,
            "balanced sampling needs K C to divide n");
  require(p.zeta > 0.0 && p.zeta <= 0.5, ErrorCode::InvalidArgument, "zeta must lie in (0, 0.5]");
  require(p.gamma >= 1.0, ErrorCode::InvalidArgument, "gamma must be >= 1");
  require(p.delta > 0.0 && p.delta < 1.0, ErrorCode::InvalidArgument, "delta must lie in (0, 1)");
  if (p.alpha0 != "gap" && p.alpha0 != "lambda_min") {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(p.alpha0, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    require(used == p.alpha0.size() && std::isfinite(v) && v > 0.0, ErrorCode::InvalidArgument,
            "alpha0 must be \"gap\", \"lambda_min\" or a positive number");
  }
  if (p.gap_search) check_min("gap_search", *p.gap_search, 1);
  check_activation(p.activation);
  check_min("kernel_samples", p.kernel_samples, 1);
  if (p.C_r) check_positive("C_r", *p.C_r);
  check_nonnegative("width_c", p.width_c);
  return p;
}

BoundEvalResult run_bound_eval(const BoundEvalParams& p) {
  BoundEvalResult out;
  out.params = p;
  const Activation act = Activation::parse(p.activation);
  const MixtureSpec spec =
      make_mixture_spec(p.K, p.C, p.d, p.sigma, p.min_dist, p.n, derive_seed(p.seed, 1));
  const ClassificationDataset ds = gen_gmm(spec, derive_seed(p.seed, 2), sampling(p.balanced));
  const Vec& y = ds.concat_y;
  const double n = static_cast<double>(p.n);
  const double opnorm_X = opnorm(ds.X);
  const Index search = p.gap_search ? *p.gap_search : default_gap_search(p.K, p.C);

  const KernelMatrix km = mc_kernel(ds.X, act, p.kernel_samples, derive_seed(p.seed, 6), p.K);
  const DecompPtr kd = kernel_sqrt_decomposition(km);
  const Vec& lam = kd->singular_values;
  double alpha0 = 0.0;
  if (p.alpha0 == "gap")
    alpha0 = lam(gap_rank(lam, search) - 1);
  else if (p.alpha0 == "lambda_min")
    alpha0 = lam(lam.size() - 1);
  else
    alpha0 = std::stod(p.alpha0);
  require(alpha0 > 0.0, ErrorCode::InvalidCutoff, "alpha0 must be positive");
  const InfoNuisanceSplit ksplit = split_at_cutoff(kd, alpha0);

  const double nu = default_nu(p.zeta, act.B, p.K);
  const ShallowNet net = init_random(p.k, p.d, p.K, nu, derive_seed(p.seed, 5), act);
  const Vec r0 = forward_concat(net, ds.X) - y;
  out.alignment = alignment_metrics(ksplit, y, r0);

  RandomInitParams rp;
  rp.n = n;
  rp.K = static_cast<double>(p.K);
  rp.B = act.B;
  rp.gamma = p.gamma;
  rp.zeta = p.zeta;
  rp.delta = p.delta;
  rp.opnorm_X = opnorm_X;
  out.random_init = random_init_bound(ksplit, y, rp);

  const DecompPtr jd = jacobian_decomposition(net, ds.X);
  const InfoNuisanceSplit jsplit = split_at_rank(jd, gap_rank(jd->singular_values, search));
  ArbitraryInitParams ap;
  ap.n = n;
  ap.nu = nu;
  ap.B = act.B;
  ap.gamma = p.gamma;
  ap.zeta = p.zeta;
  ap.delta = p.delta;
  ap.C_r = p.C_r ? *p.C_r : r0.norm() / std::sqrt(n);
  ap.opnorm_X = opnorm_X;
  out.arbitrary_init = arbitrary_init_bound(jsplit, r0, ap);

  const KernelMatrix kc =
      mc_kernel(spec.centers, act, p.kernel_samples, derive_seed(p.seed, 7), 1);
  Vec center_eig;
  symmetric_eigen(kc.base, center_eig);
  out.lambda_M = center_eig(0);
  require(out.lambda_M > 0.0, ErrorCode::NotPsd, "cluster-center kernel is singular");
  out.gmm = gmm_bound(static_cast<double>(p.K), static_cast<double>(p.C), n, out.lambda_M, p.gamma);

  const double alpha_bar =
      alpha0 / (std::pow(n, 0.25) * std::sqrt(static_cast<double>(p.K) * opnorm_X) * act.B);
  out.width_order = width_requirement(p.gamma, p.zeta, alpha_bar, n, WidthMode::Order);
  WidthExtras we;
  we.K = static_cast<double>(p.K);
  we.B = act.B;
  we.opnorm_X = opnorm_X;
  we.c = p.width_c > 0.0 ? p.width_c : out.alignment.y_info;
  we.alpha0 = alpha0;
  require(we.c > 0.0, ErrorCode::DivisionByZero, "label has no information-space component");
  out.width_appendix = width_requirement(p.gamma, p.zeta, alpha_bar, n, WidthMode::Appendix, &we);

  out.summary = {{"alpha0", alpha0},
                 {"alpha_bar", alpha_bar},
                 {"kernel_rank", ksplit.rank},
                 {"jacobian_rank", jsplit.rank},
                 {"jacobian_cutoff", jsplit.cutoff},
                 {"nu", nu},
                 {"opnorm_X", opnorm_X},
                 {"r0_norm", r0.norm()},
                 {"C_r", ap.C_r}};
  return out;
}

FileSet render(const BoundEvalResult& r) {
  const BoundEvalParams& p = r.params;
  json s = {{"command", "bound_eval"},
            {"seed", p.seed},
            {"K", p.K},
            {"C", p.C},
            {"n", p.n},
            {"sigma", p.sigma},
            {"alpha0_rule", p.alpha0},
            {"summary", r.summary},
            {"alignment", to_json(r.alignment)},
            {"random_init", to_json(r.random_init)},
            {"gmm", {{"lambda_M", r.lambda_M}, {"error_bound", r.gmm.error_bound}, {"T", r.gmm.T}}},
            {"width", {{"order", r.width_order}, {"appendix", r.width_appendix}}}};
  if (r.arbitrary_init) s["arbitrary_init"] = to_json(*r.arbitrary_init);
  return {{"bound_report.json", dump_json(s)}};
}

// --------------------------------------------------------------- kernel_check

KernelCheckParams parse_kernel_check(ConfigReader& c) {
  KernelCheckParams p;
  p.seed = c.seed();
  p.ks = c.integers("ks", p.ks);
  p.n = c.integer("n", p.n);
  p.K = c.integer("K", p.K);
  p.d = c.integer("d", p.d);
  p.num_seeds = static_cast<int>(c.integer("num_seeds", p.num_seeds));
  p.nu = c.number("nu", p.nu);
  p.activation = c.text("activation", p.activation);
  p.kernel_samples = static_cast<int>(c.integer("kernel_samples", p.kernel_samples));

  for (long long k : p.ks) check_min("ks", k, 1);
  check_min("n", p.n, 1);
  check_min("K", p.K, 1);
  check_min("d", p.d, 1);
  check_min("num_seeds", p.num_seeds, 1);
  check_positive("nu", p.nu);
  check_activation(p.activation);
  check_min("kernel_samples", p.kernel_samples, 1);
  return p;
}

KernelCheckResult run_kernel_check(const KernelCheckParams& p) {
  KernelCheckResult out;
  out.params = p;
  const Activation act = Activation::parse(p.activation);
  Rng data_rng(derive_seed(p.seed, 1));
  const Mat X = normalize_rows(data_rng.normal_matrix(p.n, p.d));
  const KernelMatrix km = mc_kernel(X, act, p.kernel_samples, derive_seed(p.seed, 2), p.K);
  out.mc_floor = kernel_error_scale(km);

  for (std::size_t idx = 0; idx < p.ks.size(); ++idx) {
    const std::uint64_t ks = derive_seed(p.seed, 100 + idx);
    std::vector<double> gaps;
    for (int t = 0; t < p.num_seeds; ++t) {
      const ShallowNet net = init_random(p.ks[idx], p.d, p.K, p.nu,
                                         derive_seed(ks, static_cast<std::uint64_t>(t)), act);
      gaps.push_back(concentration_gap(net, X, km, p.nu));
    }
    KernelCheckRow row;
    row.k = p.ks[idx];
    double mean = 0.0;
    for (double g : gaps) mean += g;
    mean /= static_cast<double>(gaps.size());
    double var = 0.0;
    for (double g : gaps) var += (g - mean) * (g - mean);
    row.gap_mean = mean;
    row.gap_stderr =
        gaps.size() > 1 ? std::sqrt(var / static_cast<double>(gaps.size() - 1) / gaps.size()) : 0.0;
    row.gap_median = median(gaps);
    out.rows.push_back(row);
    out.gaps.push_back(std::move(gaps));
  }
  out.median_ratio = out.rows.front().gap_median / out.rows.back().gap_median;
  return out;
}

FileSet render(const KernelCheckResult& r) {
  CsvTable csv(csv_schema("kernel_check"), {"k", "gap", "gap_stderr", "gap_median"});
  for (const auto& row : r.rows)
    csv.add_row({static_cast<double>(row.k), row.gap_mean, row.gap_stderr, row.gap_median});
  CsvTable trials(csv_schema("kernel_check trials"), {"k", "trial", "gap"});
  for (std::size_t i = 0; i < r.rows.size(); ++i)
    for (std::size_t t = 0; t < r.gaps[i].size(); ++t)
      trials.add_row({static_cast<double>(r.rows[i].k), static_cast<double>(t), r.gaps[i][t]});
  const KernelCheckParams& p = r.params;
  json s = {{"command", "kernel_check"},
            {"seed", p.seed},
            {"ks", p.ks},
            {"n", p.n},
            {"K", p.K},
            {"nu", p.nu},
            {"activation", p.activation},
            {"mc_floor", r.mc_floor},
            {"median_ratio_first_to_last", r.median_ratio}};
  return {{"kernel_check.csv", csv.str()},
          {"kernel_check_trials.csv", trials.str()},
          {"kernel_check_summary.json", dump_json(s)}};
}

}  // namespace ntks::cli
