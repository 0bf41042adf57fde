#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mixlab/checks.hpp"
#include "mixlab/dynamics.hpp"
#include "mixlab/exact.hpp"
#include "mixlab/ising.hpp"

namespace mixlab {

/// Moments of a long Glauber run from all-plus after burn-in, one sample
/// every `thin` steps. Negative sample covariances are clamped to 0.
struct StationarySample {
  Matrix covariance;
  std::vector<double> mean;
  double sum_variance = 0.0;   // sample Var(S)
  double dirichlet = 0.0;      // sample mean of (2/n) sum_v P(flip at v)
  int samples = 0;
  std::int64_t burn_in = 0;
  std::int64_t thin = 0;
  int clamped = 0;             // off-diagonal entries raised to 0
};

StationarySample sample_stationary(const IsingModel& model, int samples, std::uint64_t seed,
                                   std::int64_t burn_in = -1, std::int64_t thin = -1);

struct CovarianceInput {
  Matrix covariance;
  bool exact = true;
  int clamped = 0;
};

/// Exact Gibbs covariances when n <= limit, otherwise sampled and clamped.
CovarianceInput covariance_for(const IsingModel& model, int limit, int samples, std::uint64_t seed);

struct PipelineParams {
  std::optional<int> k;  // default floor(sqrt(n) / ln n)
  int limit = kDefaultEnumLimit;
  double tv_threshold = 0.25;
  double confidence = 0.99;
  int replicas = 2000;
  double pilot_fraction = 0.25;
  double c1 = 1.0;  // T0 = k ln k / 2 - c1 k
  double c2 = 2.0;  // T = (n/k)(k ln k / 2 - c2 k)
  std::vector<double> horizon_fractions{0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5};
  int stationary_samples = 2000;
  int workers = 1;
  std::uint64_t seed = 0;
};

struct HorizonResult {
  std::int64_t horizon = 0;
  double threshold = 0.0;  // r, from the pilot replicas
  double mean_blocks = 0.0;  // empirical mean of N_T
  TvLowerBound bound;
  bool certified = false;
};

struct PipelineResult {
  std::string branch;  // "gap" or "statistic"
  std::string status;  // "certified", "inconclusive" or "degenerate"
  int n = 0;
  int k = 0;
  std::vector<int> subset;
  double covariance_sum = 0.0;
  bool covariance_exact = true;
  int covariance_clamped = 0;
  double gap_inverse = 0.0;
  bool gap_exact = true;
  double lower_bound = 0.0;  // t_mix(+) >= lower_bound, or > when strict
  bool strict = false;
  double confidence = 1.0;
  std::string certificate_kind = "exact";
  bool star_exact = true;
  bool block_exact = true;
  double t0 = 0.0;
  double t_target = 0.0;
  std::vector<HorizonResult> horizons;
  PipelineParams params;
};

PipelineResult lower_bound_pipeline(const IsingModel& model, const PipelineParams& params = {});

Json to_json(const PipelineResult& r);

/// Wraps the pipeline as a check: certified is a pass, inconclusive or
/// degenerate is indeterminate, and for n <= 10 a bound above the exact
/// mixing time is a failure.
CheckReport check_pipeline(const IsingModel& model, const PipelineParams& params);

}  // namespace mixlab
