#include <doctest.h>

#include <cmath>
#include <numeric>

#include "mixlab/errors.hpp"
#include "mixlab/exact.hpp"
#include "support.hpp"

using namespace mixlab;

TEST_CASE("gibbs table matches the direct oracle") {
  std::mt19937_64 gen(11);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 1 + trial % 7;
    const auto edges = oracle::random_edges(n, 0.5, 2.0, gen);
    std::vector<double> field(static_cast<std::size_t>(n));
    for (auto& h : field) h = std::uniform_real_distribution<double>(-1.0, 1.0)(gen);
    const auto table = gibbs_distribution(support::to_model(n, edges, field));
    const auto ref = oracle::gibbs(n, edges, field);
    REQUIRE(table.size() == ref.size());
    double total = 0.0;
    for (std::size_t x = 0; x < ref.size(); ++x) {
      CHECK(table[x] == doctest::Approx(ref[x]).epsilon(1e-12));
      CHECK(table[x] >= 0.0);
      total += table[x];
    }
    CHECK(std::abs(total - 1.0) < 1e-12);
  }
}

TEST_CASE("single edge and single vertex tables") {
  const auto t = gibbs_distribution(IsingModel(2, {{0, 1, 0.5}}));
  const double z = 2 * std::exp(0.5) + 2 * std::exp(-0.5);
  CHECK(std::exp(*t.log_partition()) == doctest::Approx(4.510505).epsilon(1e-6));
  CHECK(t[0] == doctest::Approx(std::exp(0.5) / z));
  CHECK(t[3] == doctest::Approx(std::exp(0.5) / z));
  const auto v = gibbs_distribution(IsingModel(1, {}, {0.3}));
  CHECK(v[1] == doctest::Approx(0.645656).epsilon(1e-6));
}

TEST_CASE("capacity is enforced") {
  CHECK_THROWS_AS(gibbs_distribution(IsingModel(13)), CapacityError);
  CHECK_THROWS_AS(gibbs_distribution(IsingModel(5), 4), CapacityError);
  CHECK_THROWS_AS(glauber_transition_matrix(IsingModel(13)), CapacityError);
}

TEST_CASE("single edge covariance is tanh J") {
  for (double j : {0.1, 0.5, 1.0, 2.0}) {
    const auto mo = moments(gibbs_distribution(IsingModel(2, {{0, 1, j}})));
    CHECK(std::abs(mo.covariance(0, 1) - std::tanh(j)) < 1e-12);
    CHECK(std::abs(mo.covariance(0, 0) - 1.0) < 1e-12);
    CHECK(std::abs(mo.magnetization[0]) < 1e-12);
  }
}

TEST_CASE("ferromagnetic covariances are nonnegative") {
  std::mt19937_64 gen(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto m = support::random_model(gen, 2, 7);
    const auto c = moments(gibbs_distribution(m)).covariance;
    for (int u = 0; u < m.size(); ++u)
      for (int w = 0; w < m.size(); ++w) {
        CHECK(c(u, w) >= -1e-12);
        CHECK(c(u, w) == doctest::Approx(c(w, u)));
      }
  }
}

TEST_CASE("conditional magnetization") {
  const IsingModel edge(2, {{0, 1, 0.5}});
  const Clamp plus{1, 1};
  CHECK(conditional_magnetization(edge, 0, std::span<const Clamp>(&plus, 1)) ==
        doctest::Approx(std::tanh(0.5)).epsilon(1e-12));
  // A vertex with no edge to u does not change the conditional law of u.
  const IsingModel path(3, {{0, 1, 0.7}, {1, 2, 1.3}});
  const IsingModel pair(2, {{0, 1, 0.7}});
  CHECK(conditional_magnetization(path, 0, std::span<const Clamp>(&plus, 1)) ==
        doctest::Approx(conditional_magnetization(pair, 0, std::span<const Clamp>(&plus, 1))).epsilon(1e-12));
  CHECK(conditional_magnetization(path, 0, std::span<const Clamp>(&plus, 1)) ==
        doctest::Approx(std::tanh(0.7)).epsilon(1e-12));
}

TEST_CASE("finite-difference second derivative of tanh") {
  const IsingModel v(1, {}, {1.0});
  const double t = std::tanh(1.0), sech2 = 1.0 - t * t;
  CHECK(ghs_second_derivative(v, 0, 0, 0, 1e-3) == doctest::Approx(-2.0 * t * sech2).epsilon(1e-5));
  CHECK(ghs_second_derivative(v, 0, 0, 0, 1e-3) == doctest::Approx(-0.639700).epsilon(1e-5));
  CHECK_THROWS_AS(ghs_second_derivative(IsingModel(1, {}, {-0.5}), 0, 0, 0, 1e-3), InvalidInput);
  CHECK_THROWS_AS(ghs_second_derivative(v, 0, 0, 0, 1e-8), InvalidInput);
}

TEST_CASE("transition matrix matches the dense oracle and is reversible") {
  std::mt19937_64 gen(5);
  for (int trial = 0; trial < 10; ++trial) {
    const auto m = support::random_model(gen, 2, 5);
    const auto p = glauber_transition_matrix(m);
    const auto ref = oracle::glauber_kernel(m.size(), support::raw_edges(m));
    for (std::size_t x = 0; x < p.dim(); ++x) {
      double row = 0.0;
      for (std::size_t y = 0; y < p.dim(); ++y) {
        CHECK(p.at(x, y) == doctest::Approx(ref[x][y]).epsilon(1e-12));
        row += p.at(x, y);
      }
      CHECK(std::abs(row - 1.0) < 1e-12);
    }
    CHECK(p.reversible());
    CHECK(p.detailed_balance_residual() < 1e-10);
  }
}

TEST_CASE("spectral gap of the product chain") {
  for (int n = 2; n <= 8; ++n) {
    const auto p = glauber_transition_matrix(IsingModel(n));
    const auto sd = spectral_data(p);
    CHECK(std::abs(sd.eigenvalues.front() - 1.0) < 1e-9);
    CHECK(std::abs(sd.gap - 1.0 / n) < 1e-9);
    for (double l : sd.eigenvalues) CHECK(l >= -1e-12);
    // Eigenfunction lies in the span of the n coordinate functions; S is one of them.
    const auto s = sum_of_spins_table(n);
    const auto ps = p.step(std::span<const double>(s));  // row product, symmetric kernel here
    for (std::size_t x = 0; x < s.size(); ++x) CHECK(ps[x] == doctest::Approx((1.0 - 1.0 / n) * s[x]).epsilon(1e-12));
  }
}

TEST_CASE("second eigenfunction is increasing with multiplicity one on a connected ferromagnet") {
  const IsingModel tri(3, {{0, 1, 0.8}, {1, 2, 0.8}, {0, 2, 0.8}});
  const auto sd = spectral_data(glauber_transition_matrix(tri));
  CHECK(sd.second_multiplicity == 1);
  REQUIRE(sd.second_eigenfunction_increasing.has_value());
  CHECK(*sd.second_eigenfunction_increasing);
  const auto p = glauber_transition_matrix(tri).dense();
  Eigen::VectorXd f = Eigen::Map<const Eigen::VectorXd>(sd.second_eigenfunction.data(), 8);
  CHECK(((p * f) - (1.0 - sd.gap) * f).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("dirichlet form of S at zero coupling") {
  const auto p = glauber_transition_matrix(IsingModel(4));
  const auto s = sum_of_spins_table(4);
  CHECK(dirichlet_form(p, p.stationary(), s) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(variance(p.stationary(), s) == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(expectation(p.stationary(), s) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("tv curve matches the lumped product-chain oracle") {
  for (int n : {1, 3, 4, 6}) {
    const auto curve = exact_tv_curve(IsingModel(n), SpinConfig::all_plus(n), 40);
    const auto ref = oracle::free_tv_curve(n, 40);
    for (std::size_t t = 0; t < curve.size(); ++t) CHECK(curve[t] == doctest::Approx(ref[t]).epsilon(1e-12));
    CHECK(exact_mixing_time(IsingModel(n), SpinConfig::all_plus(n)) == oracle::free_mixing_time(n));
  }
  const auto one = exact_tv_curve(IsingModel(1), SpinConfig::all_plus(1), 1);
  CHECK(one[0] == doctest::Approx(0.5));
  CHECK(one[1] == doctest::Approx(0.0));
}

TEST_CASE("tv curve is nonincreasing") {
  std::mt19937_64 gen(8);
  for (int trial = 0; trial < 5; ++trial) {
    const auto m = support::random_model(gen, 2, 6);
    const auto curve = exact_tv_curve(m, SpinConfig::all_plus(m.size()), 60);
    for (std::size_t t = 1; t < curve.size(); ++t) CHECK(curve[t] <= curve[t - 1] + 1e-14);
  }
}

TEST_CASE("spectral bisection agrees with direct iteration") {
  const IsingModel m(6, {{0, 1, 1.2}, {1, 2, 1.2}, {2, 3, 1.2}, {3, 4, 1.2}, {4, 5, 1.2}, {0, 5, 1.2}});
  MixingOptions direct;
  MixingOptions spectral;
  spectral.direct_work = 0.0;
  const auto a = exact_mixing_time_info(m, SpinConfig::all_plus(6), direct);
  const auto b = exact_mixing_time_info(m, SpinConfig::all_plus(6), spectral);
  CHECK_FALSE(a.spectral);
  CHECK(b.spectral);
  CHECK(a.time == b.time);
}

TEST_CASE("projection and sum law") {
  const auto t = gibbs_distribution(IsingModel(3, {{0, 1, 0.5}, {1, 2, 0.9}}));
  const std::vector<int> f{2, 0};
  const auto proj = project_distribution(t, f);
  // Bit 0 of the projected index is vertex 2, bit 1 is vertex 0.
  double p = 0.0;
  for (std::uint64_t x = 0; x < 8; ++x)
    if (((x >> 2) & 1U) && !(x & 1U)) p += t[x];
  CHECK(proj[1] == doctest::Approx(p).epsilon(1e-12));
  const auto law = sum_law(t);
  CHECK(law.size() == 4);
  CHECK(law[3] == doctest::Approx(t[7]).epsilon(1e-12));
  CHECK(std::accumulate(law.begin(), law.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("single-site update agrees with the kernel") {
  const IsingModel m(3, {{0, 1, 0.5}, {1, 2, 0.9}}, {0.1, 0.0, 0.2});
  const auto p = glauber_transition_matrix(m);
  const auto start = DistributionTable::point_mass(3, 5);
  std::vector<double> avg(8, 0.0);
  for (int v = 0; v < 3; ++v) {
    const auto u = single_site_update(m, v, start);
    for (std::size_t x = 0; x < 8; ++x) avg[x] += u[x] / 3.0;
  }
  const auto step = p.step(start.probs());
  for (std::size_t x = 0; x < 8; ++x) CHECK(avg[x] == doctest::Approx(step[x]).epsilon(1e-12));
  // Gibbs is invariant under every single-site update.
  const auto pi = p.stationary();
  for (int v = 0; v < 3; ++v) CHECK(tv_distance(single_site_update(m, v, pi), pi) < 1e-12);
}

TEST_CASE("increasing events are counted by Dedekind numbers") {
  for (int n = 1; n <= 4; ++n) CHECK(increasing_events(n).size() == oracle::dedekind(n));
  CHECK(increasing_events(2).size() == 6);
  CHECK(increasing_events(5).size() == 7581);
  CHECK_THROWS_AS(increasing_events(6), CapacityError);
}

TEST_CASE("stochastic domination") {
  const auto hi = DistributionTable::point_mass(2, 3);
  const auto lo = DistributionTable::point_mass(2, 0);
  CHECK(stochastically_dominates(hi, lo));
  CHECK_FALSE(stochastically_dominates(lo, hi));
  const auto mid = DistributionTable::point_mass(2, 1);
  const auto other = DistributionTable::point_mass(2, 2);
  CHECK_FALSE(stochastically_dominates(mid, other));
  CHECK(stochastically_dominates(mid, mid));
  RngStream rng(1, 0);
  const auto s = sampled_dominance(DistributionTable::point_mass(7, 127), DistributionTable::uniform(7), 50, rng);
  CHECK(s.consistent);
  CHECK_FALSE(s.certificate);
}
