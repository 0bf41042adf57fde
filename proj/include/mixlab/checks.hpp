#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mixlab/dynamics.hpp"
#include "mixlab/exact.hpp"
#include "mixlab/ising.hpp"
#include "mixlab/rng.hpp"

namespace mixlab {

using Json = nlohmann::ordered_json;

/// skipped marks a checker that could not run on the instance (capacity,
/// unmet precondition); it never fails a run.
enum class Verdict { pass, fail, indeterminate, skipped };

const char* to_string(Verdict v);
Verdict verdict_from_string(const std::string& s);

/// Worst of two verdicts: fail > indeterminate > pass > skipped.
Verdict worst(Verdict a, Verdict b);

struct Certificate {
  std::string kind = "exact";  // "exact" or "monte-carlo"
  double confidence = 1.0;
  std::uint64_t samples = 0;
};

struct SeriesPoint {
  double t = 0.0;
  double value = 0.0;
  double ci = 0.0;
};

struct Series {
  std::string id;
  std::vector<SeriesPoint> points;
};

struct CheckReport {
  std::string id;
  std::string statement;
  std::string instance;
  Verdict verdict = Verdict::pass;
  double margin = 0.0;  // > 0 strictly inside the inequality
  Certificate certificate;
  std::uint64_t seed = 0;
  Json details = Json::object();
  std::vector<Series> series;
};

Json to_json(const CheckReport& r);
CheckReport check_report_from_json(const Json& j);

std::string describe(const IsingModel& model);

/// Default subset size floor(sqrt(n) / ln n), at least 0.
int default_subset_size(int n);

// --- exact checkers ------------------------------------------------------

/// t_mix from all-plus against ln 2 (1/gap - 1), plus the all-plus/all-minus
/// symmetry when the field vanishes.
CheckReport check_gap_bound(const IsingModel& model, const MixingOptions& options = {});

/// Var(S) <= E(S)/gap and E(S) <= 2 for the sum of spins S.
CheckReport check_variance_bound(const IsingModel& model, int limit = kDefaultEnumLimit);

struct SubsetSelection {
  std::vector<int> subset;  // sorted
  double pair_sum = 0.0;    // sum over ordered pairs u != w in F of C(u, w)
  double bound = 0.0;       // (k/n)^2 times the same sum over all of V
  int draws = 0;            // random subsets tried
  bool exhaustive = false;  // fell back to checking every k-subset
  CheckReport report;
};

/// A k-subset whose off-diagonal mass is at most (k/n)^2 of the total: best
/// of m random k-subsets (m = 64, doubled on failure), then swap descent,
/// with exhaustive search as the last resort. C must be square, symmetric
/// and nonnegative off the diagonal.
SubsetSelection select_low_cov_subset(const Matrix& cov, int k, RngStream& rng);

struct GhsOptions {
  double h = 1e-3;
  double tolerance = 1e-6;
  int limit = kDefaultEnumLimit;
};

/// Every second partial of every m_v at every grid point is at most the
/// tolerance, confirmed by a Richardson pair at h and h/2.
CheckReport check_ghs_concavity(const IsingModel& model, std::span<const std::vector<double>> grid,
                                const GhsOptions& options = {});

/// {0, 1/2, 1}^n for n <= 4, otherwise the corners 0 and 1 plus `extra`
/// random points of [0, 1]^n.
std::vector<std::vector<double>> default_field_grid(int n, RngStream& rng, int extra = 6);

/// Conditional magnetization subadditivity at zero field for one u and
/// target set, plus f(x+y) - f(x) <= f(y) - f(0) for f = m_u on `pairs`
/// random nonnegative field pairs.
CheckReport check_subadditivity(const IsingModel& model, int u, std::span<const int> targets, RngStream& rng,
                                int pairs = 8, int limit = kDefaultEnumLimit);

/// All u and all target sets of size <= max_targets (sampled when the count
/// exceeds max_cases), aggregated into one report.
CheckReport check_subadditivity_all(const IsingModel& model, RngStream& rng, int max_targets = 3,
                                    int max_cases = 2000, int limit = kDefaultEnumLimit);

/// Censored updates from all-plus stay stochastically higher and no closer
/// to the Gibbs law in TV. n <= 5.
CheckReport check_censoring(const IsingModel& model, std::span<const int> sequence,
                            std::span<const int> subsequence);

/// Every site sequence up to max_length and every subsequence of each.
CheckReport check_censoring_exhaustive(const IsingModel& model, int max_length);

// --- coupled z-chain checkers -------------------------------------------

struct CoupledOptions {
  std::int64_t horizon = 0;  // 0 picks ceil(2 |F| ln |F|) + |F|
  int replicas = 2000;
  double confidence = 0.99;
  int workers = 1;
  std::uint64_t seed = 0;
};

/// Integer sums over replicas of the monotone-coupled pair started from
/// (all-plus, all-minus), at every t = 0..T.
struct CoupledStats {
  std::int64_t horizon = 0;
  std::int64_t replicas = 0;
  std::int64_t coupled_steps = 0;
  std::int64_t order_violations = 0;
  std::vector<std::int64_t> distance;  // sum of sum_v |Z - Z~|
  std::vector<std::int64_t> distance_sq;  // sum of (sum_v |Z - Z~|)^2
  std::vector<std::int64_t> upper_sum;  // sum of S_t of the upper chain
  std::vector<std::int64_t> upper_sq;   // sum of S_t^2
};

/// Deterministic for fixed seed regardless of worker count.
CoupledStats simulate_coupled(const ChainSpec& spec, std::int64_t horizon, int replicas, std::uint64_t seed,
                              int workers = 1);

/// Sum over ordered pairs u != w in F of the Gibbs covariance.
double subset_covariance_sum(const Matrix& cov, std::span<const int> subset);

/// Contraction factor licensed by the covariance sum: 1 - 1/(2|F|) when the
/// sum is at most 1/2, else 1 - (1 - sum)/|F| when the sum is below 1.
std::optional<double> contraction_rate(double covariance_sum, int subset_size);

CheckReport check_contraction(const IsingModel& model, std::span<const int> subset, const Matrix& cov,
                              const CoupledOptions& options);
CheckReport check_variance_uniform(const IsingModel& model, std::span<const int> subset, const Matrix& cov,
                                   const CoupledOptions& options, int limit = kDefaultEnumLimit);
CheckReport check_expectation_decay(const IsingModel& model, std::span<const int> subset,
                                    const CoupledOptions& options);

/// The same three checks from one shared simulation.
std::vector<CheckReport> check_coupled_suite(const IsingModel& model, std::span<const int> subset,
                                             const Matrix& cov, const CoupledOptions& options,
                                             std::span<const std::string> ids, int limit = kDefaultEnumLimit);

/// Exact check of the generic variance bound on the lumped z-chain of m
/// independent sites (rate 1 - 1/m, R = 2): max over starts and t <= horizon
/// of Var(S_t) against 2 R^2 / (1 - rho^2).
struct SyntheticVarianceCheck {
  double max_variance = 0.0;
  double bound = 0.0;
  bool holds = true;
};
SyntheticVarianceCheck synthetic_variance_check(int sites, std::int64_t horizon);

}  // namespace mixlab
