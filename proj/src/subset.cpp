#include "mixlab/subset.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mixlab/errors.hpp"

namespace mixlab {

namespace {

// Components above this size cannot be enumerated at all.
constexpr int kComponentEnumCap = 30;

}  // namespace

SubsetLayout::SubsetLayout(const IsingModel& model, std::vector<int> subset)
    : model_(model), members_(std::move(subset)) {
  const int n = model_.size();
  in_subset_.assign(static_cast<std::size_t>(n), false);
  position_.assign(static_cast<std::size_t>(n), -1);
  for (std::size_t i = 0; i < members_.size(); ++i) {
    const int v = members_[i];
    if (v < 0 || v >= n) throw InvalidInput("subset vertex " + std::to_string(v) + " out of range");
    if (in_subset_[v]) throw InvalidInput("subset vertex " + std::to_string(v) + " listed twice");
    in_subset_[v] = true;
    position_[v] = static_cast<int>(i);
  }
  for (int v = 0; v < n; ++v)
    if (!in_subset_[v]) complement_.push_back(v);

  std::vector<int> comp_of(static_cast<std::size_t>(n), -1);
  for (int root : complement_) {
    if (comp_of[root] >= 0) continue;
    Component c;
    const int id = static_cast<int>(components_.size());
    std::vector<int> stack{root};
    comp_of[root] = id;
    while (!stack.empty()) {
      const int x = stack.back();
      stack.pop_back();
      c.vertices.push_back(x);
      for (const Neighbor& nb : model_.neighbors(x))
        if (!in_subset_[nb.vertex] && comp_of[nb.vertex] < 0) {
          comp_of[nb.vertex] = id;
          stack.push_back(nb.vertex);
        }
    }
    std::sort(c.vertices.begin(), c.vertices.end());
    components_.push_back(std::move(c));
  }

  adjacent_components_.assign(members_.size(), {});
  for (std::size_t id = 0; id < components_.size(); ++id) {
    Component& c = components_[id];
    largest_ = std::max(largest_, static_cast<int>(c.vertices.size()));
    auto local = [&](int v) {
      return static_cast<int>(std::lower_bound(c.vertices.begin(), c.vertices.end(), v) - c.vertices.begin());
    };
    for (const Edge& e : model_.edges()) {
      const bool u_in = comp_of[e.u] == static_cast<int>(id);
      const bool v_in = comp_of[e.v] == static_cast<int>(id);
      if (u_in && v_in) {
        c.internal.push_back({local(e.u), local(e.v), e.coupling});
      } else if (u_in && in_subset_[e.v]) {
        c.boundary.push_back({local(e.u), e.v, e.coupling});
      } else if (v_in && in_subset_[e.u]) {
        c.boundary.push_back({local(e.v), e.u, e.coupling});
      }
    }
    for (const auto& b : c.boundary) {
      auto& adj = adjacent_components_[static_cast<std::size_t>(position_[b.outside])];
      if (adj.empty() || adj.back() != static_cast<int>(id)) adj.push_back(static_cast<int>(id));
    }
  }
}

void SubsetLayout::component_fields(const Component& c, const SpinConfig& sigma, int override_vertex,
                                    int override_spin, std::vector<double>& fields) const {
  fields.resize(c.vertices.size());
  for (std::size_t i = 0; i < c.vertices.size(); ++i) fields[i] = model_.field_at(c.vertices[i]);
  for (const auto& b : c.boundary) {
    const int s = (b.outside == override_vertex) ? override_spin : sigma[b.outside];
    fields[static_cast<std::size_t>(b.local)] += b.coupling * s;
  }
}

double SubsetLayout::component_log_partition(const Component& c, const SpinConfig& sigma, int override_vertex,
                                             int override_spin) const {
  const int m = static_cast<int>(c.vertices.size());
  if (m > kComponentEnumCap) throw CapacityError("complement component too large to enumerate");
  std::vector<double> fields;
  component_fields(c, sigma, override_vertex, override_spin, fields);
  const std::size_t count = std::size_t{1} << m;
  std::vector<double> energy(count);
  double top = -INFINITY;
  for (std::size_t tau = 0; tau < count; ++tau) {
    double e = 0.0;
    for (int i = 0; i < m; ++i) e += ((tau >> i) & 1U) ? fields[i] : -fields[i];
    for (const auto& in : c.internal) e += ((((tau >> in.a) ^ (tau >> in.b)) & 1U) == 0) ? in.coupling : -in.coupling;
    energy[tau] = e;
    top = std::max(top, e);
  }
  double total = 0.0;
  for (double e : energy) total += std::exp(e - top);
  return top + std::log(total);
}

double SubsetLayout::conditional_log_odds(const SpinConfig& sigma, int v) const {
  const int pos = position(v);
  if (pos < 0) throw InvalidInput("vertex " + std::to_string(v) + " is not in the subset");
  double direct = model_.field_at(v);
  for (const Neighbor& nb : model_.neighbors(v))
    if (in_subset_[nb.vertex]) direct += nb.coupling * sigma[nb.vertex];
  double odds = 2.0 * direct;
  for (int id : adjacent_components_[static_cast<std::size_t>(pos)]) {
    const Component& c = components_[static_cast<std::size_t>(id)];
    odds += component_log_partition(c, sigma, v, 1) - component_log_partition(c, sigma, v, -1);
  }
  return odds;
}

double SubsetLayout::conditional_plus_probability(const SpinConfig& sigma, int v) const {
  return 1.0 / (1.0 + std::exp(-conditional_log_odds(sigma, v)));
}

void SubsetLayout::resample_complement(SpinConfig& sigma, RngStream& rng) const {
  std::vector<double> fields;
  std::vector<double> weight;
  for (const Component& c : components_) {
    const int m = static_cast<int>(c.vertices.size());
    if (m > kComponentEnumCap) throw CapacityError("complement component too large to enumerate");
    component_fields(c, sigma, -1, 0, fields);
    const std::size_t count = std::size_t{1} << m;
    weight.resize(count);
    double top = -INFINITY;
    for (std::size_t tau = 0; tau < count; ++tau) {
      double e = 0.0;
      for (int i = 0; i < m; ++i) e += ((tau >> i) & 1U) ? fields[i] : -fields[i];
      for (const auto& in : c.internal)
        e += ((((tau >> in.a) ^ (tau >> in.b)) & 1U) == 0) ? in.coupling : -in.coupling;
      weight[tau] = e;
      top = std::max(top, e);
    }
    double total = 0.0;
    for (double& w : weight) {
      w = std::exp(w - top);
      total += w;
    }
    const double target = rng.uniform() * total;
    std::size_t pick = count - 1;
    double acc = 0.0;
    for (std::size_t tau = 0; tau < count; ++tau) {
      acc += weight[tau];
      if (target < acc) {
        pick = tau;
        break;
      }
    }
    for (int i = 0; i < m; ++i) sigma.set(c.vertices[i], ((pick >> i) & 1U) ? 1 : -1);
  }
}

}  // namespace mixlab
