#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "mixlab/ising.hpp"
#include "mixlab/rng.hpp"

namespace mixlab {

using Matrix = Eigen::MatrixXd;

/// Default enumeration limit for tables and transition matrices.
inline constexpr int kDefaultEnumLimit = 12;
/// No table is ever enumerated above this many sites.
inline constexpr int kEnumHardCap = 20;

/// Explicit probability vector over {-1,+1}^n in canonical index order.
class DistributionTable {
 public:
  DistributionTable(int sites, std::vector<double> probs, std::optional<double> log_partition = {});

  static DistributionTable point_mass(int sites, std::uint64_t index);
  static DistributionTable uniform(int sites);

  int sites() const { return sites_; }
  std::size_t size() const { return probs_.size(); }
  const std::vector<double>& probs() const { return probs_; }
  double operator[](std::size_t i) const { return probs_[i]; }
  const std::optional<double>& log_partition() const { return log_z_; }

 private:
  int sites_;
  std::vector<double> probs_;
  std::optional<double> log_z_;
};

/// Gibbs measure by full enumeration. Throws CapacityError when
/// model.size() > limit (limit itself is capped at kEnumHardCap).
DistributionTable gibbs_distribution(const IsingModel& model, int limit = kDefaultEnumLimit);

struct Moments {
  std::vector<double> magnetization;  // E[s(v)]
  Matrix covariance;                  // E[s(u)s(v)] - m_u m_v
};

Moments moments(const DistributionTable& dist);

/// Magnetizations E[s(v)] for every v, enumerated without storing a table.
std::vector<double> magnetizations(const IsingModel& model, int limit = kEnumHardCap);

struct Clamp {
  int vertex = 0;
  int spin = 1;
};

/// E[s(u) | s(c.vertex) = c.spin for every clamp], by restricted enumeration.
double conditional_magnetization(const IsingModel& model, int u, std::span<const Clamp> clamped,
                                 int limit = kDefaultEnumLimit);

/// Central finite difference of d^2 m_v / dH_u dH_w at the model's field.
/// Requires a nonnegative field and h >= 1e-6.
double ghs_second_derivative(const IsingModel& model, int v, int u, int w, double h,
                             int limit = kDefaultEnumLimit);

/// Same difference for every v at once (one enumeration per stencil point).
std::vector<double> magnetization_second_partials(const IsingModel& model, int u, int w, double h,
                                                  int limit = kDefaultEnumLimit);

/// Sparse row-stochastic matrix on 2^n states with its stationary law.
class TransitionMatrix {
 public:
  struct Entry {
    std::uint32_t col;
    double prob;
  };

  /// Generic kernel from a dense matrix; zero entries are dropped.
  static TransitionMatrix from_dense(const Matrix& p, DistributionTable stationary);

  int sites() const { return stationary_.sites(); }
  std::size_t dim() const { return row_offset_.size() - 1; }
  std::size_t nonzeros() const { return entries_.size(); }
  std::span<const Entry> row(std::size_t x) const {
    return {entries_.data() + row_offset_[x], row_offset_[x + 1] - row_offset_[x]};
  }
  double at(std::size_t x, std::size_t y) const;

  const DistributionTable& stationary() const { return stationary_; }
  bool reversible() const { return reversible_; }
  bool heat_bath() const { return heat_bath_; }
  double detailed_balance_residual() const { return balance_residual_; }
  double max_row_error() const { return row_error_; }

  Matrix dense() const;

  /// Row-vector product q P.
  std::vector<double> step(std::span<const double> q) const;

 private:
  friend TransitionMatrix glauber_transition_matrix(const IsingModel&, int);
  TransitionMatrix(std::vector<std::size_t> offsets, std::vector<Entry> entries, DistributionTable stationary,
                   bool heat_bath);

  std::vector<std::size_t> row_offset_;
  std::vector<Entry> entries_;
  DistributionTable stationary_;
  bool heat_bath_ = false;
  bool reversible_ = false;
  double balance_residual_ = 0.0;
  double row_error_ = 0.0;
};

/// Heat-bath Glauber kernel: pick a uniform site, resample it.
TransitionMatrix glauber_transition_matrix(const IsingModel& model, int limit = kDefaultEnumLimit);

struct SpectralData {
  std::vector<double> eigenvalues;  // descending; just {1, lambda_2} when iterative
  double gap = 0.0;                 // 1 - lambda_2
  std::vector<double> second_eigenfunction;  // max |f| = 1
  int second_multiplicity = 0;               // 0 when unknown (iterative path)
  std::optional<bool> second_eigenfunction_increasing;  // set when multiplicity is 1
  bool full_spectrum = true;
};

struct SpectralOptions {
  std::size_t dense_limit = 4096;  // above this, power iteration with deflation
  double multiplicity_tol = 1e-9;
  int power_iterations = 200000;
};

/// Spectrum of a reversible kernel through the symmetrization D^1/2 P D^-1/2.
/// Throws InvalidInput for non-reversible kernels.
SpectralData spectral_data(const TransitionMatrix& p, const SpectralOptions& options = {});

/// Full eigendecomposition kept around to evaluate P^t(x, .) at large t.
class SpectralDecomposition {
 public:
  explicit SpectralDecomposition(const TransitionMatrix& p);

  const std::vector<long double>& eigenvalues() const { return values_; }  // descending
  /// ||P^t(x, .) - pi||_TV evaluated from the spectrum.
  double tv_from(std::size_t x, std::uint64_t t) const;

 private:
  std::vector<double> pi_;
  std::vector<long double> values_;
  std::vector<long double> gaps_;  // 1 - values_, refined
  Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic> vectors_;  // orthonormal, columns descending
};

/// 1/2 sum_{x,y} (f(x) - f(y))^2 pi(x) P(x, y).
double dirichlet_form(const TransitionMatrix& p, const DistributionTable& pi, std::span<const double> f);

double expectation(const DistributionTable& pi, std::span<const double> f);
double variance(const DistributionTable& pi, std::span<const double> f);

/// f(x) = sum of spins of configuration x, for all 2^n configurations.
std::vector<double> sum_of_spins_table(int sites);

double tv_distance(const DistributionTable& p, const DistributionTable& q);
double tv_distance(std::span<const double> p, std::span<const double> q);

/// TV between delta_start P^t and the Gibbs law for t = 0..horizon.
std::vector<double> exact_tv_curve(const IsingModel& model, const SpinConfig& start, std::int64_t horizon,
                                   int limit = kDefaultEnumLimit);

struct MixingOptions {
  double threshold = 0.25;
  int limit = kDefaultEnumLimit;
  /// Budget (in nonzero-entry operations) for direct row-vector iteration
  /// before switching to spectral bisection.
  double direct_work = 2.0e8;
};

struct MixingTimeInfo {
  std::int64_t time = 0;
  bool spectral = false;  // located by bisection on the spectral representation
};

std::int64_t exact_mixing_time(const IsingModel& model, const SpinConfig& start, const MixingOptions& options = {});
MixingTimeInfo exact_mixing_time_info(const IsingModel& model, const SpinConfig& start,
                                      const MixingOptions& options = {});

/// Marginal law on the listed sites; bit b of the output index is F[b].
DistributionTable project_distribution(const DistributionTable& dist, std::span<const int> subset);

/// Law of sum_{v in subset} s(v); entry j is P(S = 2j - |F|). Empty subset
/// means all sites.
std::vector<double> sum_law(const DistributionTable& dist, std::span<const int> subset = {});

/// Exact law after one heat-bath update at v.
DistributionTable single_site_update(const IsingModel& model, int v, const DistributionTable& dist);

/// Every increasing event of {-1,+1}^n as a bitmask over configuration
/// indices (n <= 5), including the empty and the full event.
const std::vector<std::uint32_t>& increasing_events(int sites);

/// min over increasing events U of p(U) - q(U); n <= 5.
double dominance_margin(const DistributionTable& p, const DistributionTable& q);

/// True iff p(U) >= q(U) - 1e-12 for every increasing U (p dominates q).
/// Throws CapacityError above 5 sites.
bool stochastically_dominates(const DistributionTable& p, const DistributionTable& q);

struct SampledDominance {
  bool consistent = true;   // no sampled event contradicts domination
  int events = 0;
  double worst_margin = 0.0;
  bool certificate = false;  // always false: sampled events prove nothing
};

/// Domination check against random increasing events (upward closures of a
/// few random generators). For 6..12 sites; not a certificate.
SampledDominance sampled_dominance(const DistributionTable& p, const DistributionTable& q, int events,
                                   RngStream& rng);

}  // namespace mixlab
