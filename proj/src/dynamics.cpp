#include "mixlab/dynamics.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "mixlab/errors.hpp"

namespace mixlab {

namespace {

std::vector<int> all_vertices(int n) {
  std::vector<int> v(static_cast<std::size_t>(n));
  std::iota(v.begin(), v.end(), 0);
  return v;
}

int default_inner_steps(int block) {
  if (block <= 1) return 1;
  const double b = block;
  return std::max(block, static_cast<int>(std::ceil(20.0 * b * std::log(b))));
}

void heat_bath_at(const IsingModel& model, SpinConfig& sigma, int v, RngStream& rng) {
  const double p = heat_bath_probability(model, sigma, v);
  sigma.set(v, rng.uniform() < p ? 1 : -1);
}

void nested_block_update(const ChainSpec& spec, SpinConfig& sigma, int v, RngStream& rng) {
  const auto& comp = spec.layout().complement();
  const auto block = static_cast<std::uint64_t>(comp.size() + 1);
  for (int i = 0; i < spec.inner_steps(); ++i) {
    const auto k = rng.index(block);
    const int site = (k == 0) ? v : comp[static_cast<std::size_t>(k - 1)];
    heat_bath_at(spec.model(), sigma, site, rng);
  }
}

}  // namespace

ChainSpec::ChainSpec(ChainVariant variant, const IsingModel& model, std::vector<int> subset,
                     std::optional<BlockMode> mode, int inner_steps)
    : variant_(variant) {
  if (variant != ChainVariant::plain && subset.empty())
    throw InvalidInput("accelerated and skip chains need a nonempty subset F");
  layout_ = std::make_shared<const SubsetLayout>(model, std::move(subset));
  const bool fits = layout_->largest_component() + 1 <= kBlockEnumLimit;
  mode_ = mode.value_or(fits ? BlockMode::exact : BlockMode::nested);
  if (mode_ == BlockMode::exact && !fits)
    throw CapacityError("exact block sampling needs every complement component plus one site within " +
                        std::to_string(kBlockEnumLimit) + " sites (largest component has " +
                        std::to_string(layout_->largest_component()) + ")");
  if (inner_steps < 0) throw InvalidInput("inner step count must be nonnegative");
  inner_steps_ =
      inner_steps > 0 ? inner_steps : default_inner_steps(static_cast<int>(layout_->complement().size()) + 1);
}

ChainSpec ChainSpec::plain(const IsingModel& model) {
  return ChainSpec(ChainVariant::plain, model, all_vertices(model.size()), BlockMode::exact, 0);
}

ChainSpec ChainSpec::accelerated(const IsingModel& model, std::vector<int> subset, std::optional<BlockMode> mode,
                                 int inner_steps) {
  return ChainSpec(ChainVariant::accelerated, model, std::move(subset), mode, inner_steps);
}

ChainSpec ChainSpec::z_chain(const IsingModel& model, std::vector<int> subset, std::optional<BlockMode> mode,
                             int inner_steps) {
  return ChainSpec(ChainVariant::z_chain, model, std::move(subset), mode, inner_steps);
}

namespace {

int glauber_step_impl(const IsingModel& model, SpinConfig& sigma, RngStream& rng, int& old) {
  const int v = static_cast<int>(rng.index(static_cast<std::uint64_t>(model.size())));
  old = sigma[v];
  heat_bath_at(model, sigma, v, rng);
  return v;
}

StepInfo accelerated_step_impl(const ChainSpec& spec, SpinConfig& sigma, RngStream& rng, int& old) {
  const IsingModel& model = spec.model();
  const int v = static_cast<int>(rng.index(static_cast<std::uint64_t>(model.size())));
  old = sigma[v];
  const auto& layout = spec.layout();
  if (!layout.contains(v)) {
    heat_bath_at(model, sigma, v, rng);
    return {v, false};
  }
  if (spec.exact()) {
    const double p = layout.conditional_plus_probability(sigma, v);
    sigma.set(v, rng.uniform() < p ? 1 : -1);
    layout.resample_complement(sigma, rng);
  } else {
    nested_block_update(spec, sigma, v, rng);
  }
  return {v, true};
}

int z_chain_step_impl(const ChainSpec& spec, SpinConfig& sigma, RngStream& rng, int& old) {
  const auto& members = spec.subset();
  const int v = members[rng.index(members.size())];
  old = sigma[v];
  if (spec.exact()) {
    const double p = spec.layout().conditional_plus_probability(sigma, v);
    sigma.set(v, rng.uniform() < p ? 1 : -1);
  } else {
    nested_block_update(spec, sigma, v, rng);
  }
  return v;
}

void check_length(const IsingModel& model, const SpinConfig& sigma) {
  if (sigma.size() != model.size()) throw DimensionMismatch("configuration has the wrong length");
}

}  // namespace

int glauber_step(const IsingModel& model, SpinConfig& sigma, RngStream& rng) {
  check_length(model, sigma);
  int old = 0;
  return glauber_step_impl(model, sigma, rng, old);
}

StepInfo accelerated_step(const ChainSpec& spec, SpinConfig& sigma, RngStream& rng) {
  check_length(spec.model(), sigma);
  int old = 0;
  return accelerated_step_impl(spec, sigma, rng, old);
}

int z_chain_step(const ChainSpec& spec, SpinConfig& sigma, RngStream& rng) {
  check_length(spec.model(), sigma);
  int old = 0;
  return z_chain_step_impl(spec, sigma, rng, old);
}

int monotone_coupled_z_step(const ChainSpec& spec, SpinConfig& upper, SpinConfig& lower, RngStream& rng) {
  if (!spec.exact()) throw InvalidInput("the monotone coupling is defined for exact block sampling");
  const auto& members = spec.subset();
  const int v = members[rng.index(members.size())];
  const double u = rng.uniform();
  const auto& layout = spec.layout();
  upper.set(v, u < layout.conditional_plus_probability(upper, v) ? 1 : -1);
  lower.set(v, u < layout.conditional_plus_probability(lower, v) ? 1 : -1);
  return v;
}

double psi_discrepancy(const IsingModel& model, std::span<const int> subset, int u, const SpinConfig& eta,
                       const SpinConfig& eta_tilde) {
  const auto k = static_cast<int>(subset.size());
  if (eta.size() != k || eta_tilde.size() != k) throw DimensionMismatch("boundary conditions must cover the subset");
  SubsetLayout layout(model, std::vector<int>(subset.begin(), subset.end()));
  const int upos = layout.position(u);
  if (upos < 0) throw InvalidInput("u must belong to the subset");
  int diff = -1;
  int count = 0;
  for (int i = 0; i < k; ++i)
    if (eta[i] != eta_tilde[i]) {
      diff = i;
      ++count;
    }
  if (count != 1) throw InvalidInput("boundary conditions must differ at exactly one vertex");
  if (diff == upos) throw InvalidInput("the differing vertex must not be u");
  if (eta[diff] != 1) throw InvalidInput("the first boundary condition must carry +1 at the differing vertex");

  auto embed = [&](const SpinConfig& b) {
    SpinConfig full = SpinConfig::all_plus(model.size());
    for (int i = 0; i < k; ++i) full.set(subset[i], b[i]);
    return full;
  };
  const double p1 = layout.conditional_plus_probability(embed(eta), u);
  const double p2 = layout.conditional_plus_probability(embed(eta_tilde), u);
  return 2.0 * (p1 - p2);
}

Trajectory run_chain(const ChainSpec& spec, const SpinConfig& start, std::int64_t steps, RngStream& rng,
                     const RecordOptions& options) {
  if (steps < 0) throw InvalidInput("step count must be nonnegative");
  if (start.size() != spec.model().size()) throw DimensionMismatch("start configuration has the wrong length");
  const auto& layout = spec.layout();
  Trajectory traj;
  SpinConfig sigma = start;
  int s = 0;
  for (int v : layout.members()) s += sigma[v];
  traj.sums.reserve(static_cast<std::size_t>(steps) + 1);
  traj.sums.push_back(s);
  if (options.configs) traj.configs.push_back(sigma);
  if (options.updates) rng.record_into(&traj.draws);

  for (std::int64_t t = 1; t <= steps; ++t) {
    const std::uint64_t before = traj.draws.size();
    StepInfo info;
    int old_spin = 0;
    switch (spec.variant()) {
      case ChainVariant::plain:
        info.site = glauber_step_impl(spec.model(), sigma, rng, old_spin);
        break;
      case ChainVariant::accelerated:
        info = accelerated_step_impl(spec, sigma, rng, old_spin);
        if (info.block) traj.block_times.push_back(t);
        break;
      case ChainVariant::z_chain:
        info.site = z_chain_step_impl(spec, sigma, rng, old_spin);
        info.block = true;
        break;
    }
    if (layout.contains(info.site)) s += sigma[info.site] - old_spin;
    traj.sums.push_back(s);
    if (options.configs) traj.configs.push_back(sigma);
    if (options.updates)
      traj.updates.push_back({t, info.site, info.block, before, static_cast<std::uint32_t>(traj.draws.size() - before)});
  }
  if (options.updates) rng.record_into(nullptr);
  traj.final_state = std::move(sigma);
  return traj;
}

Trajectory replay_chain(const ChainSpec& spec, const SpinConfig& start, const Trajectory& recorded) {
  if (recorded.sums.empty()) throw InvalidInput("recorded trajectory is empty");
  if (recorded.updates.size() + 1 != recorded.sums.size())
    throw InvalidInput("trajectory was not recorded with update records");
  RngStream rng = RngStream::replaying(recorded.draws);
  RecordOptions options;
  options.updates = true;
  options.configs = !recorded.configs.empty();
  return run_chain(spec, start, static_cast<std::int64_t>(recorded.sums.size()) - 1, rng, options);
}

std::vector<int> skip_chain_sums(const Trajectory& accelerated) {
  std::vector<int> out;
  if (accelerated.sums.empty()) return out;
  out.reserve(accelerated.block_times.size() + 1);
  out.push_back(accelerated.sums.front());
  for (auto t : accelerated.block_times) out.push_back(accelerated.sums[static_cast<std::size_t>(t)]);
  return out;
}

double hoeffding_radius(double width, std::size_t n, double delta) {
  if (n == 0) return std::numeric_limits<double>::infinity();
  return width * std::sqrt(std::log(1.0 / delta) / (2.0 * static_cast<double>(n)));
}

namespace {

double fraction_above(std::span<const int> xs, double r) {
  if (xs.empty()) throw InvalidInput("sample set is empty");
  std::size_t c = 0;
  for (int x : xs)
    if (static_cast<double>(x) > r) ++c;
  return static_cast<double>(c) / static_cast<double>(xs.size());
}

void finish(TvLowerBound& b) {
  b.estimate = std::max(0.0, b.p_plus - b.p_star);
  b.lower = std::max(0.0, b.p_plus - b.p_star - b.radius_plus - b.radius_star);
}

}  // namespace

TvLowerBound statistic_tv_lower_bound(std::span<const int> plus, std::span<const int> star, double threshold,
                                      double confidence) {
  if (!(confidence > 0.0 && confidence < 1.0)) throw InvalidInput("confidence must lie in (0, 1)");
  TvLowerBound b;
  b.threshold = threshold;
  b.confidence = confidence;
  b.plus_samples = plus.size();
  b.star_samples = star.size();
  b.p_plus = fraction_above(plus, threshold);
  b.p_star = fraction_above(star, threshold);
  const double delta = (1.0 - confidence) / 2.0;
  b.radius_plus = hoeffding_radius(1.0, plus.size(), delta);
  b.radius_star = hoeffding_radius(1.0, star.size(), delta);
  finish(b);
  return b;
}

TvLowerBound statistic_tv_lower_bound(std::span<const int> plus, std::span<const double> star_law, int m,
                                      double threshold, double confidence) {
  if (!(confidence > 0.0 && confidence < 1.0)) throw InvalidInput("confidence must lie in (0, 1)");
  if (star_law.size() != static_cast<std::size_t>(m) + 1) throw DimensionMismatch("stationary law has the wrong length");
  TvLowerBound b;
  b.threshold = threshold;
  b.confidence = confidence;
  b.plus_samples = plus.size();
  b.p_plus = fraction_above(plus, threshold);
  for (int j = 0; j <= m; ++j)
    if (static_cast<double>(2 * j - m) > threshold) b.p_star += star_law[static_cast<std::size_t>(j)];
  b.radius_plus = hoeffding_radius(1.0, plus.size(), 1.0 - confidence);
  finish(b);
  return b;
}

}  // namespace mixlab
