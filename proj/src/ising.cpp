#include "mixlab/ising.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <utility>

#include "mixlab/errors.hpp"

namespace mixlab {

IsingModel::IsingModel(int n, std::vector<Edge> edges, std::vector<double> field)
    : n_(n), edges_(std::move(edges)), field_(std::move(field)) {
  if (n_ < 1) throw InvalidInput("model needs at least one vertex");
  if (field_.empty()) field_.assign(static_cast<std::size_t>(n_), 0.0);
  if (field_.size() != static_cast<std::size_t>(n_))
    throw DimensionMismatch("field has " + std::to_string(field_.size()) + " entries for " +
                            std::to_string(n_) + " vertices");
  for (double h : field_)
    if (!std::isfinite(h)) throw InvalidInput("field values must be finite");

  std::set<std::pair<int, int>> seen;
  std::vector<std::size_t> degree(static_cast<std::size_t>(n_), 0);
  for (const Edge& e : edges_) {
    if (e.u < 0 || e.u >= n_ || e.v < 0 || e.v >= n_)
      throw InvalidInput("edge (" + std::to_string(e.u) + ", " + std::to_string(e.v) +
                         ") has a vertex outside [0, " + std::to_string(n_) + ")");
    if (e.u == e.v) throw InvalidInput("self-loop at vertex " + std::to_string(e.u));
    if (!std::isfinite(e.coupling) || e.coupling < 0.0)
      throw InvalidInput("coupling on edge (" + std::to_string(e.u) + ", " + std::to_string(e.v) +
                         ") must be a finite value >= 0 (ferromagnetic model)");
    if (!seen.emplace(std::min(e.u, e.v), std::max(e.u, e.v)).second)
      throw InvalidInput("duplicate edge (" + std::to_string(e.u) + ", " + std::to_string(e.v) + ")");
    ++degree[static_cast<std::size_t>(e.u)];
    ++degree[static_cast<std::size_t>(e.v)];
  }

  adj_offset_.assign(static_cast<std::size_t>(n_) + 1, 0);
  for (int v = 0; v < n_; ++v) adj_offset_[v + 1] = adj_offset_[v] + degree[v];
  adj_.resize(adj_offset_.back());
  std::vector<std::size_t> fill(adj_offset_.begin(), adj_offset_.end() - 1);
  for (const Edge& e : edges_) {
    adj_[fill[e.u]++] = {e.v, e.coupling};
    adj_[fill[e.v]++] = {e.u, e.coupling};
  }
}

bool IsingModel::has_field() const {
  return std::any_of(field_.begin(), field_.end(), [](double h) { return h != 0.0; });
}

std::span<const Neighbor> IsingModel::neighbors(int v) const {
  const auto b = adj_offset_[static_cast<std::size_t>(v)];
  const auto e = adj_offset_[static_cast<std::size_t>(v) + 1];
  return {adj_.data() + b, e - b};
}

IsingModel IsingModel::with_field(std::vector<double> field) const {
  return IsingModel(n_, edges_, std::move(field));
}

SpinConfig::SpinConfig(std::vector<std::int8_t> spins) : spins_(std::move(spins)) {
  for (auto s : spins_)
    if (s != 1 && s != -1) throw InvalidInput("spins must be exactly +1 or -1");
}

SpinConfig SpinConfig::all_plus(int n) {
  SpinConfig c;
  c.spins_.assign(static_cast<std::size_t>(n), 1);
  return c;
}

SpinConfig SpinConfig::all_minus(int n) {
  SpinConfig c;
  c.spins_.assign(static_cast<std::size_t>(n), -1);
  return c;
}

SpinConfig SpinConfig::from_index(std::uint64_t index, int n) {
  if (n < 0 || n > 63) throw InvalidInput("configuration index supports up to 63 sites");
  if (index >> n) throw InvalidInput("configuration index out of range");
  SpinConfig c;
  c.spins_.resize(static_cast<std::size_t>(n));
  for (int b = 0; b < n; ++b) c.spins_[b] = ((index >> b) & 1U) ? 1 : -1;
  return c;
}

void SpinConfig::set(int v, int spin) {
  if (spin != 1 && spin != -1) throw InvalidInput("spin must be +1 or -1");
  spins_.at(static_cast<std::size_t>(v)) = static_cast<std::int8_t>(spin);
}

std::uint64_t SpinConfig::index() const {
  if (spins_.size() > 63) throw InvalidInput("configuration index supports up to 63 sites");
  std::uint64_t idx = 0;
  for (std::size_t b = 0; b < spins_.size(); ++b)
    if (spins_[b] > 0) idx |= std::uint64_t{1} << b;
  return idx;
}

SpinConfig SpinConfig::flipped() const {
  SpinConfig c = *this;
  for (auto& s : c.spins_) s = static_cast<std::int8_t>(-s);
  return c;
}

namespace {

void require_size(const IsingModel& model, const SpinConfig& sigma) {
  if (sigma.size() != model.size())
    throw DimensionMismatch("configuration has " + std::to_string(sigma.size()) + " sites, model has " +
                            std::to_string(model.size()));
}

void require_vertex(const IsingModel& model, int v) {
  if (v < 0 || v >= model.size()) throw InvalidInput("vertex " + std::to_string(v) + " out of range");
}

}  // namespace

double log_weight(const IsingModel& model, const SpinConfig& sigma) {
  require_size(model, sigma);
  double e = 0.0;
  for (const Edge& edge : model.edges()) e += edge.coupling * sigma[edge.u] * sigma[edge.v];
  for (int v = 0; v < model.size(); ++v) e += model.field_at(v) * sigma[v];
  return e;
}

double unnormalized_weight(const IsingModel& model, const SpinConfig& sigma) {
  return std::exp(log_weight(model, sigma));
}

double local_field(const IsingModel& model, const SpinConfig& sigma, int v) {
  require_size(model, sigma);
  require_vertex(model, v);
  double m = model.field_at(v);
  for (const Neighbor& nb : model.neighbors(v)) m += nb.coupling * sigma[nb.vertex];
  return m;
}

double plus_probability_from_field(double m) { return 1.0 / (1.0 + std::exp(-2.0 * m)); }

double heat_bath_probability(const IsingModel& model, const SpinConfig& sigma, int v) {
  return plus_probability_from_field(local_field(model, sigma, v));
}

int sum_of_spins(const SpinConfig& sigma) {
  int s = 0;
  for (auto x : sigma.spins()) s += x;
  return s;
}

bool config_leq(const SpinConfig& sigma, const SpinConfig& tau) {
  if (sigma.size() != tau.size()) throw DimensionMismatch("configurations differ in length");
  for (int v = 0; v < sigma.size(); ++v)
    if (sigma[v] > tau[v]) return false;
  return true;
}

}  // namespace mixlab
