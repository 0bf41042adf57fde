#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace mixlab {

struct Edge {
  int u = 0;
  int v = 0;
  double coupling = 0.0;

  friend bool operator==(const Edge&, const Edge&) = default;
};

struct Neighbor {
  int vertex = 0;
  double coupling = 0.0;
};

/// Ferromagnetic Ising model: a weighted simple graph with nonnegative
/// couplings and an optional external field.
///
///   weight(sigma) = exp( sum_{uv in E} J_uv s(u) s(v) + sum_v H_v s(v) )
///
/// Construction rejects negative couplings, self-loops, out-of-range vertices
/// and repeated unordered pairs. Instances are immutable.
class IsingModel {
 public:
  explicit IsingModel(int n, std::vector<Edge> edges = {}, std::vector<double> field = {});

  int size() const { return n_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<double>& field() const { return field_; }
  double field_at(int v) const { return field_[static_cast<std::size_t>(v)]; }
  bool has_field() const;

  std::span<const Neighbor> neighbors(int v) const;

  /// Same graph and couplings with a different field vector.
  IsingModel with_field(std::vector<double> field) const;

  friend bool operator==(const IsingModel& a, const IsingModel& b) {
    return a.n_ == b.n_ && a.edges_ == b.edges_ && a.field_ == b.field_;
  }

 private:
  int n_;
  std::vector<Edge> edges_;
  std::vector<double> field_;
  std::vector<std::size_t> adj_offset_;
  std::vector<Neighbor> adj_;
};

/// A +-1 assignment to the vertices. The canonical integer index of a
/// configuration sets bit b iff vertex b carries +1.
class SpinConfig {
 public:
  SpinConfig() = default;
  explicit SpinConfig(std::vector<std::int8_t> spins);

  static SpinConfig all_plus(int n);
  static SpinConfig all_minus(int n);
  static SpinConfig from_index(std::uint64_t index, int n);

  int size() const { return static_cast<int>(spins_.size()); }
  int operator[](int v) const { return spins_[static_cast<std::size_t>(v)]; }
  void set(int v, int spin);
  std::span<const std::int8_t> spins() const { return spins_; }

  std::uint64_t index() const;
  SpinConfig flipped() const;

  friend bool operator==(const SpinConfig&, const SpinConfig&) = default;

 private:
  std::vector<std::int8_t> spins_;
};

/// Exponent of the Gibbs weight, sum J s s + sum H s.
double log_weight(const IsingModel& model, const SpinConfig& sigma);
double unnormalized_weight(const IsingModel& model, const SpinConfig& sigma);

/// sum_{u ~ v} J_uv s(u) + H_v; does not depend on s(v).
double local_field(const IsingModel& model, const SpinConfig& sigma, int v);

/// P(s(v) = +1 | rest) = 1 / (1 + exp(-2 m)) with m the local field.
double heat_bath_probability(const IsingModel& model, const SpinConfig& sigma, int v);
double plus_probability_from_field(double local_field);

int sum_of_spins(const SpinConfig& sigma);

/// Coordinatewise sigma <= tau.
bool config_leq(const SpinConfig& sigma, const SpinConfig& tau);

}  // namespace mixlab
