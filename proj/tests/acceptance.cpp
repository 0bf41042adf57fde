// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "mixlab/checks.hpp"
#include "mixlab/errors.hpp"
#include "mixlab/exact.hpp"
#include "mixlab/io.hpp"
#include "mixlab/pipeline.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace mixlab;

namespace {

struct Outcome {
  bool ok = true;
  std::string note;

  void require(bool cond, const std::string& what) {
    if (!cond && ok) note = what;
    ok = ok && cond;
  }
};

int workers() { return static_cast<int>(std::max(1U, std::thread::hardware_concurrency())); }

// Random ferromagnets for criteria 3 and 4: n in [1, 5], J in [0, 2].
std::vector<IsingModel> small_corpus() {
  std::mt19937_64 gen(20240601);
  std::vector<IsingModel> out;
  for (int i = 0; i < 50; ++i) out.push_back(support::random_model(gen, 1, 5, 0.6, 2.0));
  return out;
}

Outcome exact_engine() {
  Outcome o;
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double worst_norm = 0.0, worst_balance = 0.0;
  for (int i = 0; i < 100; ++i) {
    auto m = support::random_model(gen, 1, 8, 0.5, 2.0);
    std::vector<double> field(static_cast<std::size_t>(m.size()));
    for (auto& h : field) h = unif(gen) - 0.5;
    m = m.with_field(field);
    const auto t = gibbs_distribution(m);
    worst_norm = std::max(worst_norm, std::abs(std::accumulate(t.probs().begin(), t.probs().end(), 0.0) - 1.0));
    const auto p = glauber_transition_matrix(m);
    worst_balance = std::max(worst_balance, p.detailed_balance_residual());
    // Independent residual against the oracle table.
    const auto pi = oracle::gibbs(m.size(), support::raw_edges(m), field);
    for (std::size_t x = 0; x < p.dim(); ++x)
      for (const auto& e : p.row(x))
        worst_balance = std::max(worst_balance, std::abs(pi[x] * e.prob - pi[e.col] * p.at(e.col, x)));
  }
  o.require(worst_norm <= 1e-12, "normalization off by " + std::to_string(worst_norm));
  o.require(worst_balance < 1e-10, "detailed balance residual " + std::to_string(worst_balance));
  double worst_tanh = 0.0;
  for (double j : {0.1, 0.5, 1.0}) {
    const auto c = moments(gibbs_distribution(IsingModel(2, {{0, 1, j}}))).covariance;
    worst_tanh = std::max(worst_tanh, std::abs(c(0, 1) - std::tanh(j)));
  }
  o.require(worst_tanh <= 1e-12, "single-edge covariance off by " + std::to_string(worst_tanh));
  std::ostringstream s;
  s << "norm " << worst_norm << ", balance " << worst_balance << ", tanh " << worst_tanh;
  if (o.ok) o.note = s.str();
  return o;
}

Outcome spectral() {
  Outcome o;
  double worst_gap = 0.0, worst_residual = 0.0;
  for (int n = 2; n <= 10; ++n) {
    const auto p = glauber_transition_matrix(IsingModel(n));
    const auto sd = spectral_data(p);
    worst_gap = std::max(worst_gap, std::abs(sd.gap - 1.0 / n));
    const auto& f = sd.second_eigenfunction;
    for (std::size_t x = 0; x < p.dim(); ++x) {
      double pf = 0.0;
      for (const auto& e : p.row(x)) pf += e.prob * f[e.col];
      worst_residual = std::max(worst_residual, std::abs(pf - (1.0 - 1.0 / n) * f[x]));
    }
  }
  o.require(worst_gap <= 1e-9, "gap off by " + std::to_string(worst_gap));
  o.require(worst_residual < 1e-8, "eigen residual " + std::to_string(worst_residual));
  if (o.ok) {
    std::ostringstream s;
    s << "gap error " << worst_gap << ", eigen residual " << worst_residual;
    o.note = s.str();
  }
  return o;
}

Outcome gap_bound() {
  Outcome o;
  int passed = 0;
  double min_margin = 1e300;
  for (const auto& m : small_corpus()) {
    const auto r = check_gap_bound(m);
    const bool sym = r.details["t_mix_plus"] == r.details["t_mix_minus"];
    o.require(r.verdict == Verdict::pass, "gap bound failed on " + describe(m));
    o.require(sym, "t_mix(+) != t_mix(-) on " + describe(m));
    if (r.verdict == Verdict::pass && sym) ++passed;
    min_margin = std::min(min_margin, r.margin);
  }
  if (o.ok) o.note = std::to_string(passed) + "/50 models, min margin " + std::to_string(min_margin);
  return o;
}

Outcome variance_bound() {
  Outcome o;
  int passed = 0;
  for (const auto& m : small_corpus()) {
    const auto r = check_variance_bound(m);
    o.require(r.verdict == Verdict::pass, "variance bound failed on " + describe(m));
    if (r.verdict == Verdict::pass) ++passed;
  }
  const auto eq = check_variance_bound(IsingModel(4));
  const double var = eq.details["variance"].get<double>();
  const double es = eq.details["dirichlet"].get<double>();
  const double inv = eq.details["gap_inverse"].get<double>();
  o.require(std::abs(var - 4.0) < 1e-9 && std::abs(es - 1.0) < 1e-9 && std::abs(inv - 4.0) < 1e-9,
            "equality case values differ from Var=4, E=1, 1/gap=4");
  o.require(std::abs(var - es * inv) < 1e-9, "equality not attained at zero coupling");
  if (o.ok) o.note = std::to_string(passed) + "/50 models, equality Var=E/gap=4 at n=4";
  return o;
}

Outcome subset_selection() {
  Outcome o;
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  int cases = 0;
  for (int i = 0; i < 100; ++i) {
    const int n = 1 + i % 10;
    Matrix c(n, n);
    for (int a = 0; a < n; ++a) {
      c(a, a) = 1.0 + unif(gen);
      for (int b = a + 1; b < n; ++b) c(a, b) = c(b, a) = std::pow(unif(gen), 1 + i % 3) * 2.0;
    }
    double total = 0.0;
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        if (a != b) total += c(a, b);
    for (int k = 1; k <= n; ++k) {
      RngStream rng(static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(k));
      const auto sel = select_low_cov_subset(c, k, rng);
      double pair = 0.0;
      for (int u : sel.subset)
        for (int w : sel.subset)
          if (u != w) pair += c(u, w);
      const bool ok = static_cast<int>(sel.subset.size()) == k && pair <= double(k) * k / (double(n) * n) * total + 1e-12;
      o.require(ok, "subset bound violated at n=" + std::to_string(n) + ", k=" + std::to_string(k));
      ++cases;
    }
  }
  if (o.ok) o.note = std::to_string(cases) + " (matrix, k) cases verified";
  return o;
}

Outcome ghs() {
  Outcome o;
  std::mt19937_64 gen(6);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  int points = 0;
  double max_value = -1e300;
  for (int i = 0; i < 24; ++i) {
    const int n = 1 + i % 4;
    const auto m = support::to_model(n, oracle::random_edges(n, 0.7, 2.0, gen));
    std::vector<std::vector<double>> grid;
    const int corners = static_cast<int>(std::pow(3, n));
    for (int x = 0; x < corners; ++x) {
      std::vector<double> h(static_cast<std::size_t>(n));
      for (int v = 0, y = x; v < n; ++v, y /= 3) h[v] = 0.5 * (y % 3);
      grid.push_back(h);
    }
    for (int r = 0; r < 8; ++r) {
      std::vector<double> h(static_cast<std::size_t>(n));
      for (auto& x : h) x = unif(gen);
      grid.push_back(h);
    }
    const auto rep = check_ghs_concavity(m, grid);
    o.require(rep.verdict == Verdict::pass, "GHS " + std::string(to_string(rep.verdict)) + " on " + describe(m));
    points += static_cast<int>(grid.size());
    max_value = std::max(max_value, rep.details["max_value"].get<double>());
  }
  int graphs = 0, cases = 0;
  std::uniform_real_distribution<double> coupling(0.0, 2.0);
  for (int n = 2; n <= 4; ++n)
    for (const auto& es : oracle::connected_graphs(n)) {
      std::vector<Edge> edges;
      for (const auto& [u, v] : es) edges.push_back({u, v, coupling(gen)});
      const IsingModel m(n, edges);
      RngStream rng(7, static_cast<std::uint64_t>(graphs));
      const auto rep = check_subadditivity_all(m, rng, 3, 1000000);
      o.require(rep.verdict == Verdict::pass, "subadditivity failed on " + describe(m));
      o.require(!rep.details.value("sampled", false), "subadditivity cases were sampled");
      cases += rep.details["cases"].get<int>();
      ++graphs;
    }
  if (o.ok) {
    std::ostringstream s;
    s << points << " grid points, max second partial " << max_value << "; " << graphs << " graphs, " << cases
      << " subadditivity cases";
    o.note = s.str();
  }
  return o;
}

Outcome censoring() {
  Outcome o;
  int pairs = 0;
  for (double j : {0.3, 1.0}) {
    const IsingModel path(3, {{0, 1, j}, {1, 2, j}});
    const IsingModel tri(3, {{0, 1, j}, {1, 2, j}, {0, 2, j}});
    for (const auto* m : {&path, &tri}) {
      const auto r = check_censoring_exhaustive(*m, 4);
      o.require(r.verdict == Verdict::pass, "censoring failed on " + describe(*m));
      pairs += r.details["pairs"].get<int>();
    }
  }
  if (o.ok) o.note = std::to_string(pairs) + " (sequence, subsequence) pairs, full up-set enumeration";
  return o;
}

Outcome coupling() {
  Outcome o;
  const int n = 64, replicas = 10000;
  const std::int64_t horizon = 1000;
  std::vector<int> all(n);
  std::iota(all.begin(), all.end(), 0);
  const IsingModel model(n);
  const auto spec = ChainSpec::z_chain(model, all);
  const auto st = simulate_coupled(spec, horizon, replicas, derive_seed(2024, "acceptance"), workers());
  const double R = replicas;
  const double m = n;

  // Pooled per-step factor sum D_{t+1} / sum D_t against 1 - 1/|F|.
  double num = 0.0, den = 0.0, var = 0.0;
  for (std::int64_t t = 0; t < horizon; ++t) {
    den += static_cast<double>(st.distance[t]);
    num += static_cast<double>(st.distance[t + 1]);
    var += 4.0 * (st.distance[t] / (2.0 * m) - st.distance_sq[t] / (4.0 * m * m));
  }
  const double factor = num / den;
  const double sigma = std::sqrt(var) / den;
  const double target = 1.0 - 1.0 / m;
  o.require(std::abs(factor - target) <= 3.0 * sigma, "per-step factor outside 3 sigma");
  o.require(st.order_violations == 0, "order violated");
  o.require(st.coupled_steps >= 10000000, "fewer than 1e7 coupled steps");

  double worst_z = 1e300, max_var = 0.0;
  for (std::int64_t t = 0; t <= horizon; ++t) {
    const double mean = st.upper_sum[t] / R;
    const double v = (st.upper_sq[t] / R - mean * mean) * R / (R - 1.0);
    max_var = std::max(max_var, v);
    const double se = std::sqrt(std::max(v, 0.0) / R);
    const double bound = m * std::pow(1.0 - 1.0 / m, static_cast<double>(t));
    o.require(mean >= bound - 3.0 * se, "E S_t below bound at t=" + std::to_string(t));
    if (se > 0) worst_z = std::min(worst_z, (mean - bound) / se);
  }
  o.require(max_var <= 16.0 * m, "Var(S_t) above 16|F|");

  // The same checks through the library's reports.
  CoupledOptions co;
  co.horizon = horizon;
  co.replicas = replicas;
  co.workers = workers();
  co.seed = derive_seed(2024, "acceptance-suite");
  const std::vector<std::string> ids{"contraction", "variance_uniform", "expectation_decay"};
  for (const auto& r : check_coupled_suite(model, all, Matrix::Identity(n, n), co, ids))
    o.require(r.verdict == Verdict::pass, r.id + " verdict " + to_string(r.verdict));

  if (o.ok) {
    std::ostringstream s;
    s << "factor " << factor << " vs " << target << " (sigma " << sigma << "), " << st.coupled_steps
      << " coupled steps, min z " << worst_z << ", max Var " << max_var;
    o.note = s.str();
  }
  return o;
}

Outcome pipeline() {
  Outcome o;
  const int n = 256;
  PipelineParams p;
  p.k = n;
  p.workers = workers();
  p.seed = 256;
  const auto r = lower_bound_pipeline(IsingModel(n), p);
  const double floor = 0.15 * n * std::log(static_cast<double>(n));
  const auto truth = oracle::free_mixing_time(n);
  o.require(r.branch == "statistic", "branch " + r.branch);
  o.require(r.status == "certified", "status " + r.status);
  o.require(r.confidence >= 0.99, "confidence below 0.99");
  o.require(r.lower_bound >= floor, "bound " + std::to_string(r.lower_bound) + " below 0.15 n ln n");
  o.require(r.strict ? r.lower_bound < truth : r.lower_bound <= truth, "bound exceeds exact t_mix");

  std::mt19937_64 gen(9);
  int models = 0, certified = 0, beyond = 0, statistic = 0;
  for (int i = 0; i < 30; ++i) {
    // Weak couplings reach the statistic branch, strong ones the gap branch.
    const double jmax[] = {0.0, 0.15, 0.4, 1.0, 2.0};
    const auto m = support::random_model(gen, 2, 10, 0.5, jmax[i % 5]);
    PipelineParams q;
    q.k = m.size();
    q.replicas = 1000;
    q.workers = workers();
    q.seed = static_cast<std::uint64_t>(i);
    const auto res = lower_bound_pipeline(m, q);
    if (res.branch == "statistic") ++statistic;
    if (res.status == "certified") {
      ++certified;
      try {
        const auto t = static_cast<double>(exact_mixing_time(m, SpinConfig::all_plus(m.size())));
        const bool ok = res.strict ? res.lower_bound < t : res.lower_bound <= t;
        o.require(ok, "certified bound above exact t_mix on " + describe(m));
      } catch (const HorizonExceeded&) {
        ++beyond;
        o.require(res.lower_bound <= 4611686018427387904.0, "bound above 2^62 on " + describe(m));
      }
    }
    ++models;
  }
  if (o.ok) {
    std::ostringstream s;
    s << "n=256 certified t_mix > " << r.lower_bound << " (0.15 n ln n = " << floor << ", exact " << truth << "); "
      << certified << "/" << models << " small models certified (" << statistic << " statistic branch, " << beyond
      << " with t_mix > 2^62), none above exact";
    o.note = s.str();
  }
  return o;
}

Outcome reproducibility() {
  Outcome o;
  int configs = 0;
  for (const char* src : {"gen:erdos-renyi:n=8,p=0.4,J=0.3", "gen:random-j:n=14,p=0.3,jmin=0,jmax=0.4"}) {
    ExperimentConfig c;
    c.model_source = src;
    c.suite = {"all"};
    c.seed = 77;
    c.replicas = 400;
    c.workers = 1;
    const auto a = dump_report(run_suite(c).report);
    const auto b = dump_report(run_suite(c).report);
    c.workers = 4;
    const auto d = dump_report(run_suite(c).report);
    o.require(a == b, std::string("re-run differs for ") + src);
    o.require(a == d, std::string("worker count changes the report for ") + src);
    ++configs;
  }
  if (o.ok) o.note = std::to_string(configs) + " configs byte-identical across re-runs and 1 vs 4 workers";
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double limit;  // seconds, 0 = none
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "exact engine correctness", 10, exact_engine},
      {2, "spectral gap of the product chain", 30, spectral},
      {3, "gap lower bound on t_mix", 60, gap_bound},
      {4, "variance bound", 60, variance_bound},
      {5, "low-covariance subset", 5, subset_selection},
      {6, "GHS concavity and subadditivity", 300, ghs},
      {7, "censoring", 120, censoring},
      {8, "coupled z-chain", 300, coupling},
      {9, "pipeline probe", 600, pipeline},
      {10, "reproducibility", 0, reproducibility},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.ok = false;
      o.note = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.limit > 0 && secs >= c.limit) {
      o.ok = false;
      o.note += " (over the time limit)";
    }
    std::printf("%s criterion %2d: %-34s %7.2fs  %s\n", o.ok ? "PASS" : "FAIL", c.id, c.name, secs, o.note.c_str());
    std::fflush(stdout);
    if (!o.ok) ++failed;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
