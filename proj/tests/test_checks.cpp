#include <doctest.h>

#include <cmath>
#include <numeric>

#include "mixlab/checks.hpp"
#include "mixlab/errors.hpp"
#include "mixlab/pipeline.hpp"
#include "support.hpp"

using namespace mixlab;

TEST_CASE("verdict helpers") {
  for (auto v : {Verdict::pass, Verdict::fail, Verdict::indeterminate, Verdict::skipped})
    CHECK(verdict_from_string(to_string(v)) == v);
  CHECK(worst(Verdict::pass, Verdict::fail) == Verdict::fail);
  CHECK(worst(Verdict::indeterminate, Verdict::pass) == Verdict::indeterminate);
  CHECK(worst(Verdict::skipped, Verdict::pass) == Verdict::pass);
  CHECK_THROWS_AS(verdict_from_string("maybe"), InvalidInput);
}

TEST_CASE("report json round trip") {
  CheckReport r;
  r.id = "x";
  r.statement = "a <= b";
  r.instance = "n=2";
  r.verdict = Verdict::indeterminate;
  r.margin = -0.25;
  r.certificate = {"monte-carlo", 0.99, 400};
  r.seed = 17;
  r.details["k"] = 3;
  r.series.push_back({"s", {{0, 1.0, 0.1}, {1, 0.5, 0.1}}});
  const auto back = check_report_from_json(to_json(r));
  CHECK(to_json(back).dump() == to_json(r).dump());
}

TEST_CASE("default subset size") {
  CHECK(default_subset_size(256) == 2);
  CHECK(default_subset_size(10000) == 10);
  CHECK(default_subset_size(1) == 0);
}

TEST_CASE("gap bound on the product chain") {
  const auto r = check_gap_bound(IsingModel(4));
  CHECK(r.verdict == Verdict::pass);
  CHECK(r.certificate.kind == "exact");
  CHECK(r.details["gap"].get<double>() == doctest::Approx(0.25));
  CHECK(r.details["bound"].get<double>() == doctest::Approx(std::log(2.0) * 3.0));
  CHECK(r.details["t_mix_plus"].get<std::int64_t>() >= 3);
  CHECK(r.details["t_mix_plus"] == r.details["t_mix_minus"]);
  CHECK(r.details["t_mix_plus"].get<std::int64_t>() == oracle::free_mixing_time(4));
  CHECK(check_gap_bound(IsingModel(1)).verdict == Verdict::pass);
}

TEST_CASE("gap bound on random ferromagnets") {
  std::mt19937_64 gen(51);
  for (int trial = 0; trial < 15; ++trial) {
    const auto r = check_gap_bound(support::random_model(gen, 2, 5));
    CHECK(r.verdict == Verdict::pass);
    CHECK(r.margin >= 0.0);
    CHECK(r.details["symmetric"].get<bool>());
  }
}

TEST_CASE("variance bound") {
  const auto eq = check_variance_bound(IsingModel(4));
  CHECK(eq.verdict == Verdict::pass);
  CHECK(eq.details["variance"].get<double>() == doctest::Approx(4.0));
  CHECK(eq.details["dirichlet"].get<double>() == doctest::Approx(1.0));
  CHECK(eq.details["gap_inverse"].get<double>() == doctest::Approx(4.0));
  CHECK(std::abs(eq.margin) < 1e-9);

  const auto strict = check_variance_bound(IsingModel(3, {{0, 1, 0.5}}));
  CHECK(strict.verdict == Verdict::pass);
  CHECK(strict.margin > 0.0);
}

TEST_CASE("low covariance subset") {
  Matrix ones = Matrix::Ones(3, 3);
  RngStream rng(1, 0);
  const auto sel = select_low_cov_subset(ones, 2, rng);
  CHECK(sel.subset.size() == 2);
  CHECK(sel.pair_sum == doctest::Approx(2.0));
  CHECK(sel.bound == doctest::Approx(4.0 / 9.0 * 6.0));
  CHECK(sel.report.verdict == Verdict::pass);

  Matrix bad = Matrix::Zero(3, 3);
  bad(0, 1) = -0.1;
  bad(1, 0) = -0.1;
  CHECK_THROWS_AS(select_low_cov_subset(bad, 2, rng), InvalidInput);
  Matrix asym = Matrix::Zero(3, 3);
  asym(0, 1) = 0.2;
  CHECK_THROWS_AS(select_low_cov_subset(asym, 2, rng), InvalidInput);
  CHECK_THROWS_AS(select_low_cov_subset(ones, 4, rng), InvalidInput);
}

TEST_CASE("subset bound holds for random matrices and every k") {
  std::mt19937_64 gen(61);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 2 + trial % 9;
    Matrix c(n, n);
    for (int i = 0; i < n; ++i) {
      c(i, i) = 1.0;
      for (int j = i + 1; j < n; ++j) c(i, j) = c(j, i) = unif(gen) * unif(gen);
    }
    double total = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (i != j) total += c(i, j);
    for (int k = 1; k <= n; ++k) {
      RngStream rng(trial, k);
      const auto sel = select_low_cov_subset(c, k, rng);
      REQUIRE(sel.subset.size() == static_cast<std::size_t>(k));
      CHECK(std::is_sorted(sel.subset.begin(), sel.subset.end()));
      double pair = 0.0;
      for (int u : sel.subset)
        for (int w : sel.subset)
          if (u != w) pair += c(u, w);
      CHECK(pair == doctest::Approx(sel.pair_sum));
      CHECK(pair <= static_cast<double>(k * k) / (n * n) * total + 1e-12);
    }
  }
}

TEST_CASE("ghs concavity") {
  const IsingModel vertex(1);
  const std::vector<std::vector<double>> at_one{{1.0}};
  const auto one = check_ghs_concavity(vertex, at_one);
  CHECK(one.verdict == Verdict::pass);
  CHECK(one.details["max_value"].get<double>() == doctest::Approx(-0.6397).epsilon(1e-3));

  std::mt19937_64 gen(71);
  for (int trial = 0; trial < 3; ++trial) {
    const auto m = support::to_model(4, oracle::random_edges(4, 0.7, 1.5, gen));
    std::vector<std::vector<double>> grid;
    for (int x = 0; x < 27; ++x) grid.push_back({0.5 * (x % 3), 0.5 * (x / 3 % 3), 0.5 * (x / 9), 0.0});
    const auto r = check_ghs_concavity(m, grid);
    CHECK(r.verdict == Verdict::pass);
  }
  const std::vector<std::vector<double>> negative{{-0.5}};
  CHECK_THROWS_AS(check_ghs_concavity(vertex, negative), InvalidInput);
}

TEST_CASE("conditional magnetization subadditivity") {
  RngStream rng(2, 0);
  const IsingModel edge(2, {{0, 1, 0.5}});
  const std::vector<int> target{1};
  const auto r = check_subadditivity(edge, 0, target, rng);
  CHECK(r.verdict == Verdict::pass);
  CHECK(r.details["lhs"].get<double>() == doctest::Approx(std::tanh(0.5)));
  CHECK(r.details["rhs"].get<double>() == doctest::Approx(std::tanh(0.5)));

  const IsingModel tri(3, {{0, 1, 1.1}, {1, 2, 0.4}, {0, 2, 1.7}});
  const auto all = check_subadditivity_all(tri, rng);
  CHECK(all.verdict == Verdict::pass);
  CHECK(all.certificate.kind == "exact");
}

TEST_CASE("censoring") {
  const IsingModel path(3, {{0, 1, 0.5}, {1, 2, 0.5}});
  const auto r = check_censoring_exhaustive(path, 4);
  CHECK(r.verdict == Verdict::pass);
  CHECK(r.margin >= -1e-12);
  const std::vector<int> seq{0, 1, 2, 1}, sub{1, 1};
  CHECK(check_censoring(path, seq, sub).verdict == Verdict::pass);
  const std::vector<int> not_sub{2, 0};
  CHECK_THROWS_AS(check_censoring(path, seq, not_sub), InvalidInput);
  CHECK_THROWS_AS(check_censoring_exhaustive(IsingModel(6), 2), CapacityError);
}

TEST_CASE("contraction rate licensed by the covariance sum") {
  CHECK(*contraction_rate(0.0, 4) == doctest::Approx(1.0 - 1.0 / 8.0));
  CHECK(*contraction_rate(0.5, 4) == doctest::Approx(1.0 - 1.0 / 8.0));
  CHECK(*contraction_rate(0.75, 4) == doctest::Approx(1.0 - 0.25 / 4.0));
  CHECK_FALSE(contraction_rate(1.0, 4).has_value());
}

TEST_CASE("variance bound on the lumped independent chain") {
  for (int m : {1, 2, 5, 16}) {
    const auto s = synthetic_variance_check(m, 20 * m);
    CHECK(s.holds);
    CHECK(s.max_variance <= m + 1e-9);
    CHECK(s.bound <= 16.0 * m + 1e-9);
  }
}

TEST_CASE("coupled checks at zero coupling") {
  const int n = 12;
  std::vector<int> all(n);
  std::iota(all.begin(), all.end(), 0);
  const Matrix cov = Matrix::Identity(n, n);
  CoupledOptions o;
  o.replicas = 2000;
  o.seed = 5;
  const std::vector<std::string> ids{"contraction", "variance_uniform", "expectation_decay"};
  const auto reports = check_coupled_suite(IsingModel(n), all, cov, o, ids);
  REQUIRE(reports.size() == 3);
  for (const auto& r : reports) {
    CHECK(r.verdict == Verdict::pass);
    CHECK(r.certificate.kind == "monte-carlo");
    CHECK(r.certificate.samples == 2000);
  }
  const double factor = reports[0].details["pooled_factor"].get<double>();
  const double sigma = reports[0].details["pooled_factor_sigma"].get<double>();
  CHECK(std::abs(factor - (1.0 - 1.0 / n)) < 3.0 * sigma);
  CHECK(reports[0].details["order_violations"].get<std::int64_t>() == 0);
  // Equality case: E S_t = |F|(1 - 1/|F|)^t.
  for (const auto& p : reports[2].series.front().points)
    CHECK(std::abs(p.value - n * std::pow(1.0 - 1.0 / n, p.t)) <= p.ci);
}

TEST_CASE("coupled statistics do not depend on the worker count") {
  const IsingModel m(6, {{0, 1, 0.3}, {1, 2, 0.2}, {3, 4, 0.4}, {4, 5, 0.1}});
  const auto spec = ChainSpec::z_chain(m, {0, 2, 3, 5});
  const auto a = simulate_coupled(spec, 50, 300, 9, 1);
  const auto b = simulate_coupled(spec, 50, 300, 9, 4);
  CHECK(a.distance == b.distance);
  CHECK(a.distance_sq == b.distance_sq);
  CHECK(a.upper_sum == b.upper_sum);
  CHECK(a.upper_sq == b.upper_sq);
  CHECK(a.order_violations == 0);
}

TEST_CASE("expected upper sum on a single strong edge beats the decay bound") {
  const IsingModel edge(2, {{0, 1, 2.0}});
  const std::vector<int> both{0, 1};
  CoupledOptions o;
  o.replicas = 4000;
  o.horizon = 30;
  const std::vector<std::string> ids{"expectation_decay"};
  const auto r = check_coupled_suite(edge, both, moments(gibbs_distribution(edge)).covariance, o, ids).front();
  CHECK(r.verdict == Verdict::pass);
  // Exact E_+ S_t from the 4-state kernel.
  const auto p = glauber_transition_matrix(edge);
  std::vector<double> q(4, 0.0);
  q[3] = 1.0;
  for (int t = 0; t <= 30; ++t) {
    const double es = 2.0 * (q[3] - q[0]);
    CHECK(es >= 2.0 * std::pow(0.5, t) - 1e-12);
    q = p.step(q);
  }
}

TEST_CASE("pipeline gap branch on a supercritical complete graph") {
  const int n = 8;
  std::vector<Edge> es;
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v) es.push_back({u, v, 2.0 / n});
  const IsingModel m(n, es);
  PipelineParams p;
  p.replicas = 200;
  const auto r = lower_bound_pipeline(m, p);
  CHECK(r.branch == "gap");
  CHECK(r.status == "certified");
  CHECK(r.certificate_kind == "exact");
  const auto t = exact_mixing_time(m, SpinConfig::all_plus(n));
  CHECK(r.lower_bound <= static_cast<double>(t));
}

TEST_CASE("pipeline degenerate cases") {
  PipelineParams p;
  p.replicas = 100;
  CHECK(lower_bound_pipeline(IsingModel(1), p).status == "degenerate");
  const auto r = check_pipeline(IsingModel(1), p);
  CHECK(r.verdict == Verdict::indeterminate);
}
