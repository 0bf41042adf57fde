#pragma once

#include <random>
#include <vector>

#include "mixlab/ising.hpp"
#include "oracles.hpp"

namespace support {

inline mixlab::IsingModel to_model(int n, const std::vector<oracle::RawEdge>& edges,
                                   std::vector<double> field = {}) {
  std::vector<mixlab::Edge> es;
  for (const auto& e : edges) es.push_back({e.u, e.v, e.j});
  return mixlab::IsingModel(n, std::move(es), std::move(field));
}

inline std::vector<oracle::RawEdge> raw_edges(const mixlab::IsingModel& m) {
  std::vector<oracle::RawEdge> out;
  for (const auto& e : m.edges()) out.push_back({e.u, e.v, e.coupling});
  return out;
}

/// Random ferromagnet with n in [lo, hi], edge density p, J uniform on [0, jmax].
inline mixlab::IsingModel random_model(std::mt19937_64& gen, int lo, int hi, double p = 0.6, double jmax = 2.0) {
  const int n = std::uniform_int_distribution<int>(lo, hi)(gen);
  return to_model(n, oracle::random_edges(n, p, jmax, gen));
}

inline mixlab::IsingModel empty_model(int n) { return mixlab::IsingModel(n); }

}  // namespace support
