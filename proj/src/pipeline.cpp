#include "mixlab/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mixlab/errors.hpp"

namespace mixlab {

StationarySample sample_stationary(const IsingModel& model, int samples, std::uint64_t seed, std::int64_t burn_in,
                                   std::int64_t thin) {
  if (samples < 2) throw InvalidInput("need at least two stationary samples");
  const int n = model.size();
  const double nd = n;
  StationarySample out;
  out.burn_in = burn_in >= 0 ? burn_in : static_cast<std::int64_t>(std::ceil(10.0 * nd * std::log(std::max(nd, 2.0))));
  out.thin = thin > 0 ? thin : n;
  out.samples = samples;
  RngStream rng(seed, 0);
  SpinConfig sigma = SpinConfig::all_plus(n);
  for (std::int64_t t = 0; t < out.burn_in; ++t) glauber_step(model, sigma, rng);

  Eigen::VectorXd sum = Eigen::VectorXd::Zero(n);
  Matrix cross = Matrix::Zero(n, n);
  double s_sum = 0.0, s_sq = 0.0, dir_sum = 0.0;
  Eigen::VectorXd x(n);
  for (int i = 0; i < samples; ++i) {
    for (std::int64_t t = 0; t < out.thin; ++t) glauber_step(model, sigma, rng);
    double flips = 0.0;
    for (int v = 0; v < n; ++v) {
      x[v] = sigma[v];
      const double p = heat_bath_probability(model, sigma, v);
      flips += sigma[v] > 0 ? 1.0 - p : p;
    }
    sum += x;
    cross.selfadjointView<Eigen::Lower>().rankUpdate(x);
    const double s = x.sum();
    s_sum += s;
    s_sq += s * s;
    dir_sum += 2.0 * flips / nd;
  }
  cross = cross.selfadjointView<Eigen::Lower>();
  const double m = samples;
  const Eigen::VectorXd mean = sum / m;
  out.mean.assign(mean.data(), mean.data() + n);
  out.covariance = (cross - m * mean * mean.transpose()) / (m - 1.0);
  for (int u = 0; u < n; ++u)
    for (int w = 0; w < n; ++w)
      if (u != w && out.covariance(u, w) < 0.0) {
        out.covariance(u, w) = 0.0;
        ++out.clamped;
      }
  const double s_mean = s_sum / m;
  out.sum_variance = (s_sq - m * s_mean * s_mean) / (m - 1.0);
  out.dirichlet = dir_sum / m;
  return out;
}

CovarianceInput covariance_for(const IsingModel& model, int limit, int samples, std::uint64_t seed) {
  CovarianceInput out;
  if (model.size() <= limit) {
    out.covariance = moments(gibbs_distribution(model, limit)).covariance;
    // FKG makes every entry nonnegative; rounding can leave -1e-17.
    for (int u = 0; u < model.size(); ++u)
      for (int w = 0; w < model.size(); ++w)
        if (u != w && out.covariance(u, w) < 0.0) {
          out.covariance(u, w) = 0.0;
          ++out.clamped;
        }
    return out;
  }
  auto s = sample_stationary(model, samples, seed);
  out.covariance = std::move(s.covariance);
  out.exact = false;
  out.clamped = s.clamped;
  return out;
}

namespace {

constexpr double kLn2 = 0.69314718055994530942;

std::vector<std::int64_t> candidate_horizons(int n, double t_target, const std::vector<double>& fractions) {
  const double nl = n * std::log(static_cast<double>(n));
  std::vector<std::int64_t> out;
  for (double c : fractions) {
    if (!(c > 0.0)) throw InvalidInput("horizon fractions must be positive");
    out.push_back(static_cast<std::int64_t>(std::ceil(c * nl)));
  }
  if (t_target >= 1.0) out.push_back(static_cast<std::int64_t>(std::floor(t_target)));
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  out.erase(std::remove_if(out.begin(), out.end(), [](std::int64_t t) { return t < 1; }), out.end());
  return out;
}

double mean_of(const std::vector<int>& xs) {
  double s = 0.0;
  for (int x : xs) s += x;
  return xs.empty() ? 0.0 : s / static_cast<double>(xs.size());
}

}  // namespace

PipelineResult lower_bound_pipeline(const IsingModel& model, const PipelineParams& params) {
  const int n = model.size();
  if (!(params.confidence > 0.0 && params.confidence < 1.0)) throw InvalidInput("confidence must lie in (0, 1)");
  if (!(params.tv_threshold > 0.0 && params.tv_threshold < 1.0)) throw InvalidInput("TV threshold must lie in (0, 1)");
  if (params.replicas < 2) throw InvalidInput("need at least two replicas");
  if (!(params.pilot_fraction > 0.0 && params.pilot_fraction < 1.0))
    throw InvalidInput("pilot fraction must lie in (0, 1)");

  PipelineResult res;
  res.params = params;
  res.n = n;
  if (n == 1) {
    res.branch = "statistic";
    res.status = "degenerate";
    res.lower_bound = 0.0;
    return res;
  }
  const double nd = n;
  const double nln = nd * std::log(nd);

  // Gap stage.
  std::optional<StationarySample> stationary;
  if (n <= params.limit) {
    const auto spec = spectral_data(glauber_transition_matrix(model, params.limit));
    res.gap_inverse = 1.0 / spec.gap;
  } else {
    stationary = sample_stationary(model, params.stationary_samples, derive_seed(params.seed, "stationary"));
    res.gap_exact = false;
    res.gap_inverse = stationary->sum_variance / stationary->dirichlet;
  }
  if (res.gap_inverse >= nln) {
    res.branch = "gap";
    res.status = "certified";
    res.lower_bound = kLn2 * (res.gap_inverse - 1.0);
    res.strict = false;
    res.certificate_kind = res.gap_exact ? "exact" : "estimate";
    return res;
  }

  // Statistic stage.
  res.branch = "statistic";
  int k = params.k ? *params.k : default_subset_size(n);
  if (k > n) throw InvalidInput("subset size exceeds n");
  res.k = k;
  if (k < 2) {
    res.status = "degenerate";
    return res;
  }
  CovarianceInput cov;
  if (n <= params.limit) {
    cov = covariance_for(model, params.limit, params.stationary_samples, 0);
  } else {
    cov.covariance = stationary->covariance;
    cov.exact = false;
    cov.clamped = stationary->clamped;
  }
  res.covariance_exact = cov.exact;
  res.covariance_clamped = cov.clamped;
  RngStream subset_rng(derive_seed(params.seed, "subset"), 0);
  auto sel = select_low_cov_subset(cov.covariance, k, subset_rng);
  res.subset = sel.subset;
  res.covariance_sum = sel.pair_sum;

  const double kd = k;
  res.t0 = 0.5 * kd * std::log(kd) - params.c1 * kd;
  res.t_target = (nd / kd) * (0.5 * kd * std::log(kd) - params.c2 * kd);

  const auto zspec = ChainSpec::z_chain(model, res.subset);
  res.block_exact = zspec.exact();
  std::optional<ChainSpec> accel;
  if (!zspec.exact()) accel = ChainSpec::accelerated(model, res.subset, BlockMode::nested);
  const auto& layout = zspec.layout();

  const auto horizons = candidate_horizons(n, res.t_target, params.horizon_fractions);
  const std::size_t m = horizons.size();
  const std::int64_t t_max = horizons.back();
  const int pilot = std::max(1, static_cast<int>(std::floor(params.replicas * params.pilot_fraction)));
  const int main = params.replicas - pilot;
  if (main < 1) throw InvalidInput("pilot fraction leaves no main replicas");

  // plus[c][i]: S over F at horizon c for replica i; blocks[c][i]: N_T.
  const auto R = static_cast<std::size_t>(params.replicas);
  std::vector<std::vector<int>> plus(m, std::vector<int>(R)), blocks(m, std::vector<int>(R));
  const std::uint64_t plus_seed = derive_seed(params.seed, "plus");
  parallel_for(R, params.workers, [&](std::size_t i) {
    RngStream rng(plus_seed, i);
    SpinConfig sigma = SpinConfig::all_plus(n);
    int s = k;
    int nt = 0;
    std::size_t c = 0;
    for (std::int64_t t = 1; t <= t_max; ++t) {
      if (zspec.exact()) {
        const int v = static_cast<int>(rng.index(static_cast<std::uint64_t>(n)));
        if (layout.contains(v)) {
          const int before = sigma[v];
          sigma.set(v, rng.uniform() < layout.conditional_plus_probability(sigma, v) ? 1 : -1);
          s += sigma[v] - before;
          ++nt;
        }
      } else {
        const auto before = sigma;
        const auto info = accelerated_step(*accel, sigma, rng);
        if (info.block) {
          ++nt;
          s += sigma[info.site] - before[info.site];
        }
      }
      while (c < m && horizons[c] == t) {
        plus[c][i] = s;
        blocks[c][i] = nt;
        ++c;
      }
    }
  });

  // Stationary law of S over F.
  std::vector<double> star_law;
  std::vector<int> star_pilot, star_main;
  double star_mean = 0.0;
  if (n <= params.limit && zspec.exact()) {
    star_law = sum_law(gibbs_distribution(model, params.limit), res.subset);
    for (std::size_t j = 0; j < star_law.size(); ++j) star_mean += star_law[j] * (2.0 * static_cast<double>(j) - kd);
  } else {
    res.star_exact = false;
    // Independent runs from all-plus; S* then errs upward, which only
    // shrinks the TV lower bound.
    const auto burn = static_cast<std::int64_t>(std::ceil(10.0 * nln));
    std::vector<int> star(R);
    const std::uint64_t star_seed = derive_seed(params.seed, "star");
    parallel_for(R, params.workers, [&](std::size_t i) {
      RngStream rng(star_seed, i);
      SpinConfig sigma = SpinConfig::all_plus(n);
      for (std::int64_t t = 0; t < burn; ++t) z_chain_step(zspec, sigma, rng);
      int s = 0;
      for (int v : res.subset) s += sigma[v];
      star[i] = s;
    });
    star_pilot.assign(star.begin(), star.begin() + pilot);
    star_main.assign(star.begin() + pilot, star.end());
    star_mean = mean_of(star_pilot);
  }

  const double per_conf = 1.0 - (1.0 - params.confidence) / static_cast<double>(m);
  res.status = "inconclusive";
  for (std::size_t c = 0; c < m; ++c) {
    HorizonResult h;
    h.horizon = horizons[c];
    std::vector<int> pilot_s(plus[c].begin(), plus[c].begin() + pilot);
    std::vector<int> main_s(plus[c].begin() + pilot, plus[c].end());
    h.threshold = 0.5 * (mean_of(pilot_s) + star_mean);
    double nt = 0.0;
    for (int x : blocks[c]) nt += x;
    h.mean_blocks = nt / static_cast<double>(R);
    h.bound = res.star_exact ? statistic_tv_lower_bound(main_s, star_law, k, h.threshold, per_conf)
                             : statistic_tv_lower_bound(main_s, star_main, h.threshold, per_conf);
    h.certified = h.bound.lower > params.tv_threshold;
    if (h.certified) {
      res.status = "certified";
      res.lower_bound = static_cast<double>(h.horizon);
      res.strict = true;
    }
    res.horizons.push_back(std::move(h));
  }
  res.confidence = params.confidence;
  res.certificate_kind = "monte-carlo";
  return res;
}

Json to_json(const PipelineResult& r) {
  Json j;
  j["branch"] = r.branch;
  j["status"] = r.status;
  j["n"] = r.n;
  j["k"] = r.k;
  j["subset"] = r.subset;
  j["covariance_sum"] = r.covariance_sum;
  j["covariance_exact"] = r.covariance_exact;
  j["covariance_clamped"] = r.covariance_clamped;
  j["gap_inverse"] = r.gap_inverse;
  j["gap_exact"] = r.gap_exact;
  j["n_ln_n"] = r.n > 1 ? r.n * std::log(static_cast<double>(r.n)) : 0.0;
  j["lower_bound"] = r.lower_bound;
  j["strict"] = r.strict;
  j["confidence"] = r.confidence;
  j["certificate_kind"] = r.certificate_kind;
  j["star_exact"] = r.star_exact;
  j["block_exact"] = r.block_exact;
  j["constants"] = {{"c1", r.params.c1},
                    {"c2", r.params.c2},
                    {"t0", r.t0},
                    {"t_target", r.t_target},
                    {"tv_threshold", r.params.tv_threshold},
                    {"pilot_fraction", r.params.pilot_fraction},
                    {"replicas", r.params.replicas}};
  Json hs = Json::array();
  for (const auto& h : r.horizons)
    hs.push_back({{"horizon", h.horizon},
                  {"threshold", h.threshold},
                  {"mean_blocks", h.mean_blocks},
                  {"p_plus", h.bound.p_plus},
                  {"p_star", h.bound.p_star},
                  {"estimate", h.bound.estimate},
                  {"radius_plus", h.bound.radius_plus},
                  {"radius_star", h.bound.radius_star},
                  {"lower", h.bound.lower},
                  {"certified", h.certified}});
  j["horizons"] = std::move(hs);
  return j;
}

CheckReport check_pipeline(const IsingModel& model, const PipelineParams& params) {
  CheckReport r;
  r.id = "pipeline";
  r.statement = "certified lower bound on t_mix from all-plus (spectral or distinguishing-statistic branch)";
  r.instance = describe(model);
  r.seed = params.seed;
  const auto res = lower_bound_pipeline(model, params);
  r.details = to_json(res);
  r.certificate.kind = res.certificate_kind;
  r.certificate.confidence = res.confidence;
  r.certificate.samples = res.branch == "statistic" && res.status != "degenerate"
                              ? static_cast<std::uint64_t>(params.replicas)
                              : 0;
  r.verdict = res.status == "certified" ? Verdict::pass : Verdict::indeterminate;
  r.margin = res.lower_bound;
  if (model.size() <= 10 && model.size() <= params.limit) {
    MixingOptions mo;
    mo.threshold = params.tv_threshold;
    mo.limit = params.limit;
    try {
      const auto exact = exact_mixing_time(model, SpinConfig::all_plus(model.size()), mo);
      r.details["exact_t_mix"] = exact;
      const double t = static_cast<double>(exact);
      const bool exceeds = res.strict ? res.lower_bound >= t : res.lower_bound > t;
      if (exceeds) r.verdict = Verdict::fail;
      r.margin = t - res.lower_bound;
    } catch (const HorizonExceeded&) {
      // t_mix > 2^62: any bound below that is consistent with the truth.
      constexpr double kHorizon = 4611686018427387904.0;
      r.details["exact_t_mix"] = "> 2^62";
      if (res.lower_bound > kHorizon) r.verdict = Verdict::indeterminate;
    }
  }
  Series s{"tv_lower", {}};
  for (const auto& h : res.horizons)
    s.points.push_back({static_cast<double>(h.horizon), h.bound.lower, h.bound.radius_plus + h.bound.radius_star});
  r.series.push_back(std::move(s));
  return r;
}

}  // namespace mixlab
