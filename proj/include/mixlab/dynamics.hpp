#pragma once

#include <algorithm>
#include <cstdint>
#include <exception>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <thread>
#include <vector>

#include "mixlab/ising.hpp"
#include "mixlab/rng.hpp"
#include "mixlab/subset.hpp"

namespace mixlab {

enum class ChainVariant { plain, accelerated, z_chain };

/// How a block {v} u F^c is redrawn: exactly, component by component, or by
/// a burst of single-site heat-bath updates inside the block (approximate).
enum class BlockMode { exact, nested };

/// Largest complement component (plus the updated F vertex) that exact block
/// sampling will enumerate.
inline constexpr int kBlockEnumLimit = 20;

class ChainSpec {
 public:
  static ChainSpec plain(const IsingModel& model);
  /// Mode defaults to exact when every complement component fits the
  /// enumeration limit, nested otherwise. inner_steps = 0 picks
  /// max(b, ceil(20 b ln b)) for block size b = 1 + |F^c|.
  static ChainSpec accelerated(const IsingModel& model, std::vector<int> subset,
                               std::optional<BlockMode> mode = {}, int inner_steps = 0);
  static ChainSpec z_chain(const IsingModel& model, std::vector<int> subset, std::optional<BlockMode> mode = {},
                           int inner_steps = 0);

  ChainVariant variant() const { return variant_; }
  BlockMode mode() const { return mode_; }
  bool exact() const { return mode_ == BlockMode::exact; }
  int inner_steps() const { return inner_steps_; }
  const IsingModel& model() const { return layout_->model(); }
  const SubsetLayout& layout() const { return *layout_; }
  const std::vector<int>& subset() const { return layout_->members(); }

 private:
  ChainSpec(ChainVariant variant, const IsingModel& model, std::vector<int> subset, std::optional<BlockMode> mode,
            int inner_steps);

  ChainVariant variant_;
  BlockMode mode_ = BlockMode::exact;
  int inner_steps_ = 0;
  std::shared_ptr<const SubsetLayout> layout_;
};

struct StepInfo {
  int site = 0;
  bool block = false;
};

/// One heat-bath Glauber update at a uniform site; returns the site.
int glauber_step(const IsingModel& model, SpinConfig& sigma, RngStream& rng);

/// Uniform v in V; single-site update if v is outside F, otherwise a joint
/// redraw of {v} u F^c given the spins on F\{v}.
StepInfo accelerated_step(const ChainSpec& spec, SpinConfig& sigma, RngStream& rng);

/// Uniform v in F redrawn from its conditional law given F\{v} with F^c
/// summed out. Configurations are full length; only the F entries matter in
/// exact mode, while nested mode also carries F^c state. Returns the site.
int z_chain_step(const ChainSpec& spec, SpinConfig& sigma, RngStream& rng);

/// Grand monotone coupling: shared site and shared uniform, thresholded
/// against each chain's own conditional probability. Exact mode only.
int monotone_coupled_z_step(const ChainSpec& spec, SpinConfig& upper, SpinConfig& lower, RngStream& rng);

/// E[s(u) | F\{u} = eta] - E[s(u) | F\{u} = eta_tilde], F^c summed out.
/// eta and eta_tilde are indexed by position in subset, must differ at
/// exactly one position v != u, and eta must be +1 there.
double psi_discrepancy(const IsingModel& model, std::span<const int> subset, int u, const SpinConfig& eta,
                       const SpinConfig& eta_tilde);

struct UpdateRecord {
  std::int64_t time = 0;
  int site = 0;
  bool block = false;
  std::uint64_t draw_offset = 0;
  std::uint32_t draw_count = 0;
};

struct RecordOptions {
  bool configs = false;
  bool updates = false;
};

struct Trajectory {
  std::vector<int> sums;  // S_t over the subset (all of V for plain chains), t = 0..T
  std::vector<SpinConfig> configs;
  std::vector<UpdateRecord> updates;
  std::vector<std::uint64_t> draws;  // raw words consumed, when updates are recorded
  std::vector<std::int64_t> block_times;  // K_t: times of block updates (accelerated)
  SpinConfig final_state;
};

Trajectory run_chain(const ChainSpec& spec, const SpinConfig& start, std::int64_t steps, RngStream& rng,
                     const RecordOptions& options = {});

/// Reruns a recorded trajectory from its logged draws.
Trajectory replay_chain(const ChainSpec& spec, const SpinConfig& start, const Trajectory& recorded);

/// S at the block-update times: the skip chain's statistic.
std::vector<int> skip_chain_sums(const Trajectory& accelerated);

struct TvLowerBound {
  double threshold = 0.0;
  double p_plus = 0.0;  // empirical P(S_T > r)
  double p_star = 0.0;  // P(S* > r), empirical or exact
  double estimate = 0.0;  // max(0, p_plus - p_star)
  double radius_plus = 0.0;
  double radius_star = 0.0;
  double lower = 0.0;  // estimate minus both radii, floored at 0
  double confidence = 0.99;
  std::size_t plus_samples = 0;
  std::size_t star_samples = 0;  // 0 when the stationary law is exact
};

/// Two-sample lower bound on TV(law(S_T), law(S*)) through the event
/// {S > r}, with one-sided Hoeffding radii at the given confidence.
TvLowerBound statistic_tv_lower_bound(std::span<const int> plus, std::span<const int> star, double threshold,
                                      double confidence = 0.99);

/// Same with the exact stationary law of S over |F| = m sites; entry j of
/// star_law is P(S* = 2j - m).
TvLowerBound statistic_tv_lower_bound(std::span<const int> plus, std::span<const double> star_law, int m,
                                      double threshold, double confidence = 0.99);

/// One-sided Hoeffding radius for the mean of n samples in an interval of
/// the given width, failure probability delta.
double hoeffding_radius(double width, std::size_t n, double delta);

/// Runs fn(i) for i in [0, count) on up to `workers` threads. Each index is
/// processed exactly once; callers write results to slot i and reduce in
/// index order afterwards.
template <class Fn>
void parallel_for(std::size_t count, int workers, Fn&& fn) {
  const std::size_t w = std::max<std::size_t>(1, std::min<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), count));
  if (w <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(w);
  std::exception_ptr failure;
  std::mutex failure_mutex;
  for (std::size_t k = 0; k < w; ++k)
    pool.emplace_back([&, k] {
      try {
        for (std::size_t i = k; i < count; i += w) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace mixlab
