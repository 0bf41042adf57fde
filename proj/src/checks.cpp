#include "mixlab/checks.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include "mixlab/errors.hpp"
#include "mixlab/subset.hpp"

namespace mixlab {

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::pass:
      return "pass";
    case Verdict::fail:
      return "fail";
    case Verdict::indeterminate:
      return "indeterminate";
    case Verdict::skipped:
      return "skipped";
  }
  return "fail";
}

Verdict verdict_from_string(const std::string& s) {
  if (s == "pass") return Verdict::pass;
  if (s == "fail") return Verdict::fail;
  if (s == "indeterminate") return Verdict::indeterminate;
  if (s == "skipped") return Verdict::skipped;
  throw InvalidInput("unknown verdict '" + s + "'");
}

Verdict worst(Verdict a, Verdict b) {
  auto rank = [](Verdict v) {
    switch (v) {
      case Verdict::skipped:
        return 0;
      case Verdict::pass:
        return 1;
      case Verdict::indeterminate:
        return 2;
      case Verdict::fail:
        return 3;
    }
    return 3;
  };
  return rank(a) >= rank(b) ? a : b;
}

Json to_json(const CheckReport& r) {
  Json j;
  j["id"] = r.id;
  j["statement"] = r.statement;
  j["instance"] = r.instance;
  j["verdict"] = to_string(r.verdict);
  j["margin"] = std::isfinite(r.margin) ? Json(r.margin) : Json(nullptr);
  j["certificate"] = {{"kind", r.certificate.kind},
                      {"confidence", r.certificate.confidence},
                      {"samples", r.certificate.samples}};
  j["seed"] = r.seed;
  j["details"] = r.details;
  Json series = Json::object();
  for (const auto& s : r.series) {
    Json rows = Json::array();
    for (const auto& p : s.points) rows.push_back({p.t, p.value, p.ci});
    series[s.id] = std::move(rows);
  }
  j["series"] = std::move(series);
  return j;
}

CheckReport check_report_from_json(const Json& j) {
  CheckReport r;
  r.id = j.at("id").get<std::string>();
  r.statement = j.at("statement").get<std::string>();
  r.instance = j.at("instance").get<std::string>();
  r.verdict = verdict_from_string(j.at("verdict").get<std::string>());
  r.margin = j.at("margin").is_null() ? std::numeric_limits<double>::quiet_NaN() : j.at("margin").get<double>();
  const auto& c = j.at("certificate");
  r.certificate.kind = c.at("kind").get<std::string>();
  r.certificate.confidence = c.at("confidence").get<double>();
  r.certificate.samples = c.at("samples").get<std::uint64_t>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.details = j.at("details");
  for (const auto& [name, rows] : j.at("series").items()) {
    Series s{name, {}};
    for (const auto& row : rows) s.points.push_back({row.at(0).get<double>(), row.at(1).get<double>(), row.at(2).get<double>()});
    r.series.push_back(std::move(s));
  }
  return r;
}

std::string describe(const IsingModel& model) {
  std::ostringstream os;
  os << "n=" << model.size() << ", " << model.edges().size() << " edges";
  if (!model.edges().empty()) {
    double lo = model.edges().front().coupling, hi = lo;
    for (const auto& e : model.edges()) {
      lo = std::min(lo, e.coupling);
      hi = std::max(hi, e.coupling);
    }
    os << ", J in [" << lo << ", " << hi << "]";
  }
  os << (model.has_field() ? ", nonzero field" : ", zero field");
  return os.str();
}

int default_subset_size(int n) {
  if (n < 2) return 0;
  return static_cast<int>(std::floor(std::sqrt(static_cast<double>(n)) / std::log(static_cast<double>(n))));
}

namespace {

constexpr double kLn2 = 0.69314718055994530942;

CheckReport make_report(std::string id, std::string statement, const IsingModel& model) {
  CheckReport r;
  r.id = std::move(id);
  r.statement = std::move(statement);
  r.instance = describe(model);
  return r;
}

double offdiag_sum(const Matrix& c, std::span<const int> subset) {
  double s = 0.0;
  for (int u : subset)
    for (int w : subset)
      if (u != w) s += c(u, w);
  return s;
}

}  // namespace

// ---------------------------------------------------------------------------
// Exact checkers

CheckReport check_gap_bound(const IsingModel& model, const MixingOptions& options) {
  auto r = make_report("gap_bound", "t_mix(+) >= ln 2 * (1/gap - 1), and t_mix(+) = t_mix(-) at zero field", model);
  const int n = model.size();
  const auto kernel = glauber_transition_matrix(model, options.limit);
  const auto spec = spectral_data(kernel);
  const auto plus = exact_mixing_time_info(model, SpinConfig::all_plus(n), options);
  const auto minus = exact_mixing_time_info(model, SpinConfig::all_minus(n), options);
  const double inv = 1.0 / spec.gap;
  const double bound = kLn2 * (inv - 1.0);
  const bool symmetric_required = !model.has_field();
  const bool symmetric = plus.time == minus.time;
  r.margin = static_cast<double>(plus.time) - bound;
  r.verdict = (static_cast<double>(plus.time) >= bound && (symmetric || !symmetric_required)) ? Verdict::pass
                                                                                                : Verdict::fail;
  r.details["gap"] = spec.gap;
  r.details["gap_inverse"] = inv;
  r.details["bound"] = bound;
  r.details["threshold"] = options.threshold;
  r.details["t_mix_plus"] = plus.time;
  r.details["t_mix_minus"] = minus.time;
  r.details["symmetric"] = symmetric;
  r.details["spectral_search"] = plus.spectral || minus.spectral;
  r.details["second_multiplicity"] = spec.second_multiplicity;
  r.details["second_eigenfunction_increasing"] =
      spec.second_eigenfunction_increasing ? Json(*spec.second_eigenfunction_increasing) : Json(nullptr);

  const std::int64_t horizon = std::min<std::int64_t>(plus.time, 1000);
  const auto curve = exact_tv_curve(model, SpinConfig::all_plus(n), horizon, options.limit);
  Series s{"tv_curve", {}};
  for (std::size_t t = 0; t < curve.size(); ++t) s.points.push_back({static_cast<double>(t), curve[t], 0.0});
  r.series.push_back(std::move(s));
  return r;
}

CheckReport check_variance_bound(const IsingModel& model, int limit) {
  auto r = make_report("variance_bound", "Var(S) <= E(S)/gap and E(S) <= 2 for the sum of spins", model);
  const auto kernel = glauber_transition_matrix(model, limit);
  const auto spec = spectral_data(kernel);
  const auto& pi = kernel.stationary();
  const auto s = sum_of_spins_table(model.size());
  const double var = variance(pi, s);
  const double dir = dirichlet_form(kernel, pi, s);
  const double rhs = dir / spec.gap;
  const double slack = 1e-9 * std::max(1.0, rhs);
  const bool ok_var = var <= rhs + slack;
  const bool ok_dir = dir <= 2.0 + 1e-12;
  r.margin = std::min(rhs - var, 2.0 - dir);
  r.verdict = (ok_var && ok_dir) ? Verdict::pass : Verdict::fail;
  const double n = model.size();
  r.details["variance"] = var;
  r.details["dirichlet"] = dir;
  r.details["gap"] = spec.gap;
  r.details["gap_inverse"] = 1.0 / spec.gap;
  r.details["rhs"] = rhs;
  r.details["two_n_ln_n"] = 2.0 * n * std::log(n);
  return r;
}

// ---------------------------------------------------------------------------
// Subset selection

namespace {

struct SwapState {
  std::vector<int> members;
  std::vector<char> in;
  std::vector<double> row;  // sum_{w in F, w != x} C(x, w)
};

SwapState make_swap_state(const Matrix& c, std::vector<int> members) {
  const int n = static_cast<int>(c.rows());
  SwapState st;
  st.members = std::move(members);
  st.in.assign(static_cast<std::size_t>(n), 0);
  for (int v : st.members) st.in[v] = 1;
  st.row.assign(static_cast<std::size_t>(n), 0.0);
  for (int x = 0; x < n; ++x)
    for (int w : st.members)
      if (w != x) st.row[x] += c(x, w);
  return st;
}

void swap_descent(const Matrix& c, SwapState& st) {
  const int n = static_cast<int>(c.rows());
  for (int guard = 0; guard < 100000; ++guard) {
    double best = -1e-13;
    int bi = -1, bj = -1;
    for (std::size_t a = 0; a < st.members.size(); ++a) {
      const int i = st.members[a];
      for (int j = 0; j < n; ++j) {
        if (st.in[j]) continue;
        const double delta = 2.0 * (st.row[j] - c(j, i) - st.row[i]);
        if (delta < best) {
          best = delta;
          bi = static_cast<int>(a);
          bj = j;
        }
      }
    }
    if (bi < 0) return;
    const int i = st.members[bi];
    st.members[bi] = bj;
    st.in[i] = 0;
    st.in[bj] = 1;
    for (int x = 0; x < n; ++x) {
      if (x != i) st.row[x] -= c(x, i);
      if (x != bj) st.row[x] += c(x, bj);
    }
  }
}

std::vector<int> random_subset(int n, int k, RngStream& rng) {
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = 0; i < k; ++i) {
    const auto j = i + static_cast<int>(rng.index(static_cast<std::uint64_t>(n - i)));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(static_cast<std::size_t>(k));
  return idx;
}

double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

}  // namespace

SubsetSelection select_low_cov_subset(const Matrix& cov, int k, RngStream& rng) {
  const int n = static_cast<int>(cov.rows());
  if (cov.cols() != cov.rows()) throw DimensionMismatch("covariance matrix must be square");
  if (n < 1) throw InvalidInput("covariance matrix is empty");
  if (k < 0 || k > n) throw InvalidInput("subset size must lie in [0, n]");
  double total = 0.0;
  double scale = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double x = cov(i, j);
      if (!std::isfinite(x)) throw InvalidInput("covariance entries must be finite");
      if (i != j && x < 0.0) throw InvalidInput("covariance entries must be nonnegative off the diagonal");
      if (std::abs(x - cov(j, i)) > 1e-12 * (1.0 + std::abs(x))) throw InvalidInput("covariance matrix must be symmetric");
      if (i != j) total += x;
      scale = std::max(scale, std::abs(x));
    }
  const double ratio = static_cast<double>(k) / n;
  const double bound = ratio * ratio * total;
  const double tol = 1e-12 * (1.0 + total);

  SubsetSelection out;
  out.bound = bound;
  std::vector<int> best;
  double best_sum = std::numeric_limits<double>::infinity();
  if (k <= 1) {
    best = random_subset(n, k, rng);
    best_sum = 0.0;
  } else {
    int m = 64;
    while (true) {
      for (int d = 0; d < m; ++d) {
        auto cand = random_subset(n, k, rng);
        const double s = offdiag_sum(cov, cand);
        ++out.draws;
        if (s < best_sum) {
          best_sum = s;
          best = std::move(cand);
        }
      }
      auto st = make_swap_state(cov, best);
      swap_descent(cov, st);
      std::sort(st.members.begin(), st.members.end());
      const double s = offdiag_sum(cov, st.members);
      if (s <= best_sum) {
        best_sum = s;
        best = st.members;
      }
      if (best_sum <= bound + tol) break;
      if (m >= 4096 && binomial(n, k) <= 4.0e6) {
        // Every k-subset in lexicographic order; the minimum meets the bound.
        out.exhaustive = true;
        std::vector<int> cur(static_cast<std::size_t>(k));
        std::iota(cur.begin(), cur.end(), 0);
        while (true) {
          const double c = offdiag_sum(cov, cur);
          if (c < best_sum) {
            best_sum = c;
            best = cur;
          }
          int i = k - 1;
          while (i >= 0 && cur[i] == n - k + i) --i;
          if (i < 0) break;
          ++cur[i];
          for (int j = i + 1; j < k; ++j) cur[j] = cur[j - 1] + 1;
        }
        break;
      }
      m *= 2;
      if (m > (1 << 22)) break;
    }
  }
  std::sort(best.begin(), best.end());
  out.subset = best;
  out.pair_sum = offdiag_sum(cov, best);

  CheckReport& r = out.report;
  r.id = "low_cov_subset";
  r.statement = "a k-subset F with sum_{u != w in F} C(u, w) <= (k/n)^2 sum_{i != j} C(i, j)";
  r.instance = "n=" + std::to_string(n) + ", k=" + std::to_string(k);
  r.margin = bound - out.pair_sum;
  r.verdict = out.pair_sum <= bound + tol ? Verdict::pass : Verdict::fail;
  r.details["k"] = k;
  r.details["subset"] = out.subset;
  r.details["pair_sum"] = out.pair_sum;
  r.details["bound"] = bound;
  r.details["total"] = total;
  r.details["draws"] = out.draws;
  r.details["exhaustive"] = out.exhaustive;
  return out;
}

// ---------------------------------------------------------------------------
// GHS

std::vector<std::vector<double>> default_field_grid(int n, RngStream& rng, int extra) {
  std::vector<std::vector<double>> grid;
  if (n <= 4) {
    const double levels[3] = {0.0, 0.5, 1.0};
    std::size_t count = 1;
    for (int i = 0; i < n; ++i) count *= 3;
    for (std::size_t c = 0; c < count; ++c) {
      std::vector<double> h(static_cast<std::size_t>(n));
      std::size_t x = c;
      for (int i = 0; i < n; ++i) {
        h[i] = levels[x % 3];
        x /= 3;
      }
      grid.push_back(std::move(h));
    }
    return grid;
  }
  grid.emplace_back(static_cast<std::size_t>(n), 0.0);
  grid.emplace_back(static_cast<std::size_t>(n), 1.0);
  for (int e = 0; e < extra; ++e) {
    std::vector<double> h(static_cast<std::size_t>(n));
    for (auto& x : h) x = rng.uniform();
    grid.push_back(std::move(h));
  }
  return grid;
}

CheckReport check_ghs_concavity(const IsingModel& model, std::span<const std::vector<double>> grid,
                                const GhsOptions& options) {
  auto r = make_report("ghs_concavity", "d^2 m_v / dH_u dH_w <= 0 for H >= 0", model);
  const int n = model.size();
  if (grid.empty()) throw InvalidInput("field grid is empty");
  const double h = options.h;
  const double h2 = h / 2.0;
  const double eps = std::numeric_limits<double>::epsilon();
  const double noise = 4.0 * eps / (h2 * h2);

  std::int64_t evaluated = 0, near_zero = 0, undecided = 0, failed = 0;
  double max_value = -std::numeric_limits<double>::infinity();
  double max_extrapolated = max_value;
  Json failures = Json::array();
  Series s{"max_partial", {}};
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const auto& field = grid[g];
    if (static_cast<int>(field.size()) != n) throw DimensionMismatch("grid point has the wrong length");
    for (double x : field)
      if (!(x >= 0.0)) throw InvalidInput("grid fields must be nonnegative");
    const IsingModel at = model.with_field(field);
    double point_max = -std::numeric_limits<double>::infinity();
    for (int u = 0; u < n; ++u)
      for (int w = u; w < n; ++w) {
        const auto d1 = magnetization_second_partials(at, u, w, h, options.limit);
        const auto d2 = magnetization_second_partials(at, u, w, h2, options.limit);
        for (int v = 0; v < n; ++v) {
          ++evaluated;
          const double extrap = (4.0 * d2[v] - d1[v]) / 3.0;
          const double trunc = std::abs(d1[v] - d2[v]) * 4.0 / 3.0;
          const double zone = 10.0 * (trunc + noise);
          max_value = std::max(max_value, d1[v]);
          max_extrapolated = std::max(max_extrapolated, extrap);
          point_max = std::max(point_max, d1[v]);
          if (std::abs(extrap) <= zone) ++near_zero;
          if (d1[v] <= options.tolerance && extrap <= options.tolerance) continue;
          if (d1[v] > options.tolerance && extrap > options.tolerance && extrap > zone) {
            ++failed;
            if (failures.size() < 10)
              failures.push_back({{"grid_point", g}, {"v", v}, {"u", u}, {"w", w}, {"value", d1[v]}});
          } else {
            ++undecided;
          }
        }
      }
    s.points.push_back({static_cast<double>(g), point_max, 0.0});
  }
  r.margin = -max_value;
  r.verdict = failed > 0 ? Verdict::fail : (undecided > 0 ? Verdict::indeterminate : Verdict::pass);
  r.details["h"] = h;
  r.details["tolerance"] = options.tolerance;
  r.details["grid_points"] = grid.size();
  r.details["evaluated"] = evaluated;
  r.details["max_value"] = max_value;
  r.details["max_extrapolated"] = max_extrapolated;
  r.details["sign_indeterminate"] = near_zero;
  r.details["undecided"] = undecided;
  r.details["failures"] = failures;
  r.series.push_back(std::move(s));
  return r;
}

// ---------------------------------------------------------------------------
// Subadditivity

namespace {

// E[s(u) | s(t) = +1 for t in targets] straight from a Gibbs table.
double clamped_mean(const DistributionTable& table, int u, std::uint64_t mask) {
  double num = 0.0, den = 0.0;
  for (std::uint64_t x = 0; x < table.size(); ++x) {
    if ((x & mask) != mask) continue;
    const double p = table[x];
    den += p;
    num += ((x >> u) & 1U) ? p : -p;
  }
  return num / den;
}

struct ConcavityPairs {
  double margin = std::numeric_limits<double>::infinity();
  int failed = 0;
  int checked = 0;
};

ConcavityPairs field_pairs(const IsingModel& model, int u, int pairs, RngStream& rng, int limit) {
  ConcavityPairs out;
  const int n = model.size();
  const double f0 = magnetizations(model, limit)[u];
  for (int p = 0; p < pairs; ++p) {
    std::vector<double> x(static_cast<std::size_t>(n)), y(x.size()), xy(x.size());
    for (int i = 0; i < n; ++i) {
      x[i] = rng.uniform();
      y[i] = rng.uniform();
      xy[i] = x[i] + y[i];
    }
    const double fx = magnetizations(model.with_field(x), limit)[u];
    const double fy = magnetizations(model.with_field(y), limit)[u];
    const double fxy = magnetizations(model.with_field(xy), limit)[u];
    const double m = (fy - f0) - (fxy - fx);
    out.margin = std::min(out.margin, m);
    ++out.checked;
    if (m < -1e-12) ++out.failed;
  }
  return out;
}

}  // namespace

CheckReport check_subadditivity(const IsingModel& model, int u, std::span<const int> targets, RngStream& rng,
                                int pairs, int limit) {
  auto r = make_report("subadditivity",
                       "E[s(u) | s(v_i) = +1 for all i] <= sum_i E[s(u) | s(v_i) = +1] at zero field", model);
  const int n = model.size();
  if (model.has_field()) throw InvalidInput("subadditivity is stated for the zero-field measure");
  if (u < 0 || u >= n) throw InvalidInput("vertex out of range");
  if (targets.empty()) throw InvalidInput("target set is empty");
  std::uint64_t mask = 0;
  for (int t : targets) {
    if (t < 0 || t >= n) throw InvalidInput("vertex out of range");
    if (t == u) throw InvalidInput("u must not be a target");
    if ((mask >> t) & 1U) throw InvalidInput("targets must be distinct");
    mask |= std::uint64_t{1} << t;
  }
  const auto table = gibbs_distribution(model, limit);
  const double lhs = clamped_mean(table, u, mask);
  double rhs = 0.0;
  for (int t : targets) rhs += clamped_mean(table, u, std::uint64_t{1} << t);
  const auto cp = field_pairs(model, u, pairs, rng, limit);
  r.margin = std::min(rhs - lhs, cp.margin);
  r.verdict = (lhs <= rhs + 1e-12 && cp.failed == 0) ? Verdict::pass : Verdict::fail;
  r.details["u"] = u;
  r.details["targets"] = std::vector<int>(targets.begin(), targets.end());
  r.details["lhs"] = lhs;
  r.details["rhs"] = rhs;
  r.details["field_pairs"] = cp.checked;
  r.details["field_pair_margin"] = cp.margin;
  return r;
}

CheckReport check_subadditivity_all(const IsingModel& model, RngStream& rng, int max_targets, int max_cases,
                                    int limit) {
  auto r = make_report("subadditivity",
                       "E[s(u) | s(v_i) = +1 for all i] <= sum_i E[s(u) | s(v_i) = +1] at zero field", model);
  const int n = model.size();
  if (model.has_field()) throw InvalidInput("subadditivity is stated for the zero-field measure");
  const auto table = gibbs_distribution(model, limit);

  std::vector<std::pair<int, std::uint64_t>> cases;
  for (int u = 0; u < n; ++u)
    for (std::uint64_t mask = 1; mask < (std::uint64_t{1} << n); ++mask) {
      if ((mask >> u) & 1U) continue;
      const int size = std::popcount(mask);
      if (size <= max_targets) cases.emplace_back(u, mask);
    }
  const std::size_t total_cases = cases.size();
  bool sampled = false;
  if (static_cast<int>(cases.size()) > max_cases) {
    sampled = true;
    for (int i = 0; i < max_cases; ++i) {
      const auto j = i + static_cast<std::size_t>(rng.index(cases.size() - static_cast<std::size_t>(i)));
      std::swap(cases[i], cases[j]);
    }
    cases.resize(static_cast<std::size_t>(max_cases));
  }

  std::vector<double> single(static_cast<std::size_t>(n * n), 0.0);
  for (int u = 0; u < n; ++u)
    for (int t = 0; t < n; ++t)
      if (t != u) single[u * n + t] = clamped_mean(table, u, std::uint64_t{1} << t);

  double margin = std::numeric_limits<double>::infinity();
  std::int64_t failed = 0;
  Json failures = Json::array();
  for (const auto& [u, mask] : cases) {
    const double lhs = clamped_mean(table, u, mask);
    double rhs = 0.0;
    for (int t = 0; t < n; ++t)
      if ((mask >> t) & 1U) rhs += single[u * n + t];
    margin = std::min(margin, rhs - lhs);
    if (lhs > rhs + 1e-12) {
      ++failed;
      if (failures.size() < 10) failures.push_back({{"u", u}, {"mask", mask}, {"lhs", lhs}, {"rhs", rhs}});
    }
  }
  int pair_failed = 0, pair_checked = 0;
  for (int u = 0; u < n; ++u) {
    const auto cp = field_pairs(model, u, 2, rng, limit);
    margin = std::min(margin, cp.margin);
    pair_failed += cp.failed;
    pair_checked += cp.checked;
  }
  r.margin = margin;
  r.verdict = (failed == 0 && pair_failed == 0) ? Verdict::pass : Verdict::fail;
  r.details["max_targets"] = max_targets;
  r.details["cases"] = cases.size();
  r.details["total_cases"] = total_cases;
  r.details["sampled"] = sampled;
  r.details["failed"] = failed;
  r.details["failures"] = failures;
  r.details["field_pairs"] = pair_checked;
  r.details["field_pair_failures"] = pair_failed;
  return r;
}

// ---------------------------------------------------------------------------
// Censoring

namespace {

constexpr int kCensoringMaxSites = 5;

bool is_subsequence(std::span<const int> sub, std::span<const int> seq) {
  std::size_t j = 0;
  for (int x : seq)
    if (j < sub.size() && sub[j] == x) ++j;
  return j == sub.size();
}

class UpdateCache {
 public:
  explicit UpdateCache(const IsingModel& model) : model_(model) {}

  const DistributionTable& law(const std::vector<int>& seq) {
    auto it = cache_.find(seq);
    if (it != cache_.end()) return it->second;
    if (seq.empty()) {
      const auto top = SpinConfig::all_plus(model_.size()).index();
      return cache_.emplace(seq, DistributionTable::point_mass(model_.size(), top)).first->second;
    }
    std::vector<int> prefix(seq.begin(), seq.end() - 1);
    DistributionTable next = single_site_update(model_, seq.back(), law(prefix));
    return cache_.emplace(seq, std::move(next)).first->second;
  }

 private:
  const IsingModel& model_;
  std::map<std::vector<int>, DistributionTable> cache_;
};

struct CensoringOutcome {
  double dominance = 0.0;
  double tv_gap = 0.0;  // TV(nu, pi) - TV(mu, pi)
  bool ok = true;
};

CensoringOutcome compare(const DistributionTable& mu, const DistributionTable& nu, const DistributionTable& pi) {
  CensoringOutcome o;
  o.dominance = dominance_margin(nu, mu);
  o.tv_gap = tv_distance(nu, pi) - tv_distance(mu, pi);
  o.ok = o.dominance >= -1e-12 && o.tv_gap >= -1e-12;
  return o;
}

void require_censoring_capacity(const IsingModel& model) {
  if (model.size() > kCensoringMaxSites)
    throw CapacityError("censoring check enumerates increasing events and needs n <= 5");
}

}  // namespace

CheckReport check_censoring(const IsingModel& model, std::span<const int> sequence, std::span<const int> subsequence) {
  auto r = make_report("censoring", "censored updates from all-plus dominate and are no closer to the Gibbs law", model);
  require_censoring_capacity(model);
  for (int v : sequence)
    if (v < 0 || v >= model.size()) throw InvalidInput("update site out of range");
  if (!is_subsequence(subsequence, sequence)) throw InvalidInput("censored sequence is not a subsequence");
  UpdateCache cache(model);
  const auto pi = gibbs_distribution(model);
  const auto& mu = cache.law(std::vector<int>(sequence.begin(), sequence.end()));
  const auto& nu = cache.law(std::vector<int>(subsequence.begin(), subsequence.end()));
  const auto o = compare(mu, nu, pi);
  r.margin = std::min(o.dominance, o.tv_gap);
  r.verdict = o.ok ? Verdict::pass : Verdict::fail;
  r.details["sequence"] = std::vector<int>(sequence.begin(), sequence.end());
  r.details["subsequence"] = std::vector<int>(subsequence.begin(), subsequence.end());
  r.details["dominance_margin"] = o.dominance;
  r.details["tv_full"] = tv_distance(mu, pi);
  r.details["tv_censored"] = tv_distance(nu, pi);
  return r;
}

CheckReport check_censoring_exhaustive(const IsingModel& model, int max_length) {
  auto r = make_report("censoring", "censored updates from all-plus dominate and are no closer to the Gibbs law", model);
  require_censoring_capacity(model);
  if (max_length < 0 || max_length > 8) throw InvalidInput("sequence length must lie in [0, 8]");
  const int n = model.size();
  UpdateCache cache(model);
  const auto pi = gibbs_distribution(model);
  std::int64_t pairs = 0, sequences = 0, failed = 0;
  double margin = std::numeric_limits<double>::infinity();
  Json failures = Json::array();
  for (int len = 0; len <= max_length; ++len) {
    std::vector<int> seq(static_cast<std::size_t>(len), 0);
    while (true) {
      ++sequences;
      const auto& mu = cache.law(seq);
      for (std::uint32_t keep = 0; keep < (1U << len); ++keep) {
        std::vector<int> sub;
        for (int i = 0; i < len; ++i)
          if ((keep >> i) & 1U) sub.push_back(seq[i]);
        const auto o = compare(mu, cache.law(sub), pi);
        ++pairs;
        margin = std::min({margin, o.dominance, o.tv_gap});
        if (!o.ok) {
          ++failed;
          if (failures.size() < 10) failures.push_back({{"sequence", seq}, {"subsequence", sub}});
        }
      }
      int i = len - 1;
      while (i >= 0 && seq[i] == n - 1) seq[i--] = 0;
      if (i < 0) break;
      ++seq[i];
    }
  }
  r.margin = margin;
  r.verdict = failed == 0 ? Verdict::pass : Verdict::fail;
  r.details["max_length"] = max_length;
  r.details["sequences"] = sequences;
  r.details["pairs"] = pairs;
  r.details["increasing_events"] = increasing_events(n).size();
  r.details["failed"] = failed;
  r.details["failures"] = failures;
  return r;
}

// ---------------------------------------------------------------------------
// Coupled z-chains

CoupledStats simulate_coupled(const ChainSpec& spec, std::int64_t horizon, int replicas, std::uint64_t seed,
                              int workers) {
  if (horizon < 0) throw InvalidInput("horizon must be nonnegative");
  if (replicas < 1) throw InvalidInput("need at least one replica");
  if (!spec.exact()) throw InvalidInput("coupled simulation needs exact block sampling");
  const int n = spec.model().size();
  const auto& layout = spec.layout();
  const auto& members = layout.members();
  const auto m = static_cast<std::int64_t>(members.size());
  const auto len = static_cast<std::size_t>(horizon) + 1;

  // Fixed chunking so the reduction does not depend on the worker count;
  // all accumulators are integers.
  const std::size_t chunks = std::min<std::size_t>(64, static_cast<std::size_t>(replicas));
  struct Acc {
    std::vector<std::int64_t> d, d2, s, s2;
    std::int64_t violations = 0;
  };
  std::vector<Acc> acc(chunks);
  parallel_for(chunks, workers, [&](std::size_t c) {
    Acc& a = acc[c];
    a.d.assign(len, 0);
    a.d2.assign(len, 0);
    a.s.assign(len, 0);
    a.s2.assign(len, 0);
    for (auto rep = static_cast<std::int64_t>(c); rep < replicas; rep += static_cast<std::int64_t>(chunks)) {
      RngStream rng(seed, static_cast<std::uint64_t>(rep));
      SpinConfig upper = SpinConfig::all_plus(n);
      SpinConfig lower = SpinConfig::all_minus(n);
      std::int64_t d = 2 * m;
      std::int64_t s = m;
      a.d[0] += d;
      a.d2[0] += d * d;
      a.s[0] += s;
      a.s2[0] += s * s;
      for (std::size_t t = 1; t < len; ++t) {
        const auto v = members[rng.index(members.size())];
        const int before_u = upper[v], before_l = lower[v];
        const double x = rng.uniform();
        const int nu = x < layout.conditional_plus_probability(upper, v) ? 1 : -1;
        const int nl = x < layout.conditional_plus_probability(lower, v) ? 1 : -1;
        upper.set(v, nu);
        lower.set(v, nl);
        if (nu < nl) ++a.violations;
        d += std::abs(nu - nl) - std::abs(before_u - before_l);
        s += nu - before_u;
        a.d[t] += d;
        a.d2[t] += d * d;
        a.s[t] += s;
        a.s2[t] += s * s;
      }
    }
  });
  CoupledStats out;
  out.horizon = horizon;
  out.replicas = replicas;
  out.coupled_steps = static_cast<std::int64_t>(replicas) * horizon;
  out.distance.assign(len, 0);
  out.distance_sq.assign(len, 0);
  out.upper_sum.assign(len, 0);
  out.upper_sq.assign(len, 0);
  for (const auto& a : acc) {
    out.order_violations += a.violations;
    for (std::size_t t = 0; t < len; ++t) {
      out.distance[t] += a.d[t];
      out.distance_sq[t] += a.d2[t];
      out.upper_sum[t] += a.s[t];
      out.upper_sq[t] += a.s2[t];
    }
  }
  return out;
}

double subset_covariance_sum(const Matrix& cov, std::span<const int> subset) { return offdiag_sum(cov, subset); }

std::optional<double> contraction_rate(double covariance_sum, int subset_size) {
  if (subset_size < 1) return std::nullopt;
  const double m = subset_size;
  if (covariance_sum <= 0.5) return 1.0 - 1.0 / (2.0 * m);
  if (covariance_sum < 1.0) return 1.0 - (1.0 - covariance_sum) / m;
  return std::nullopt;
}

SyntheticVarianceCheck synthetic_variance_check(int sites, std::int64_t horizon) {
  if (sites < 1) throw InvalidInput("need at least one site");
  const int m = sites;
  const double rho = 1.0 - 1.0 / m;
  SyntheticVarianceCheck out;
  out.bound = 2.0 * 4.0 / (1.0 - rho * rho);
  std::vector<double> p(static_cast<std::size_t>(m) + 1), q(p.size());
  for (int k0 = 0; k0 <= m; ++k0) {
    std::fill(p.begin(), p.end(), 0.0);
    p[k0] = 1.0;
    for (std::int64_t t = 1; t <= horizon; ++t) {
      std::fill(q.begin(), q.end(), 0.0);
      for (int k = 0; k <= m; ++k) {
        if (p[k] == 0.0) continue;
        const double down = 0.5 * k / m;
        const double up = 0.5 * (m - k) / m;
        if (k > 0) q[k - 1] += p[k] * down;
        if (k < m) q[k + 1] += p[k] * up;
        q[k] += p[k] * (1.0 - down - up);
      }
      std::swap(p, q);
      double mean = 0.0, sq = 0.0;
      for (int k = 0; k <= m; ++k) {
        const double s = 2.0 * k - m;
        mean += p[k] * s;
        sq += p[k] * s * s;
      }
      out.max_variance = std::max(out.max_variance, sq - mean * mean);
    }
  }
  out.holds = out.max_variance <= out.bound;
  return out;
}

namespace {

std::int64_t default_horizon(std::size_t m) {
  const double k = static_cast<double>(m);
  return static_cast<std::int64_t>(std::ceil(2.0 * k * std::log(std::max(k, 1.0)))) + static_cast<std::int64_t>(m);
}

CheckReport coupled_report(std::string id, std::string statement, const IsingModel& model, std::span<const int> subset,
                           const CoupledOptions& options, const CoupledStats& stats) {
  auto r = make_report(std::move(id), std::move(statement), model);
  r.instance += ", |F|=" + std::to_string(subset.size());
  r.seed = options.seed;
  r.certificate.kind = "monte-carlo";
  r.certificate.confidence = options.confidence;
  r.certificate.samples = static_cast<std::uint64_t>(stats.replicas);
  r.details["replicas"] = stats.replicas;
  r.details["horizon"] = stats.horizon;
  r.details["subset"] = std::vector<int>(subset.begin(), subset.end());
  return r;
}

CheckReport contraction_from(const IsingModel& model, std::span<const int> subset, const Matrix& cov,
                             const CoupledOptions& options, const CoupledStats& st) {
  auto r = coupled_report("contraction", "E sum_v |Z_t - Z~_t| <= (1 - 1/(2|F|))^t * 2|F| under the monotone coupling",
                          model, subset, options, st);
  const auto m = static_cast<int>(subset.size());
  const double covsum = subset_covariance_sum(cov, subset);
  const auto rate = contraction_rate(covsum, m);
  r.details["covariance_sum"] = covsum;
  r.details["order_violations"] = st.order_violations;
  r.details["coupled_steps"] = st.coupled_steps;
  const double R = static_cast<double>(st.replicas);
  const auto len = st.distance.size();
  // Pooled per-step factor. Its standard error treats each step as one
  // coalescence trial of probability p = D/(2|F|) removing 2 from D, which
  // is exact at zero coupling and a heuristic otherwise.
  double num = 0.0, den = 0.0, trial_var = 0.0;
  for (std::size_t t = 0; t + 1 < len; ++t) {
    den += static_cast<double>(st.distance[t]);
    num += static_cast<double>(st.distance[t + 1]);
    const double sp = static_cast<double>(st.distance[t]) / (2.0 * m);
    const double sp2 = static_cast<double>(st.distance_sq[t]) / (4.0 * m * m);
    trial_var += 4.0 * (sp - sp2);
  }
  r.details["pooled_factor"] = den > 0.0 ? Json(num / den) : Json(nullptr);
  r.details["pooled_factor_sigma"] = den > 0.0 ? Json(std::sqrt(std::max(trial_var, 0.0)) / den) : Json(nullptr);
  Series s{"distance", {}};
  const double delta = (1.0 - options.confidence) / static_cast<double>(len);
  const double radius = hoeffding_radius(2.0 * m, st.replicas, delta);
  for (std::size_t t = 0; t < len; ++t) s.points.push_back({static_cast<double>(t), st.distance[t] / R, radius});
  if (!rate) {
    r.verdict = Verdict::skipped;
    r.margin = std::numeric_limits<double>::quiet_NaN();
    r.details["reason"] = "covariance sum over F is at least 1; no contraction rate is licensed";
    r.series.push_back(std::move(s));
    return r;
  }
  r.details["rate"] = *rate;
  r.details["half_rate"] = covsum <= 0.5;
  double margin = std::numeric_limits<double>::infinity();
  bool ok = st.order_violations == 0;
  for (std::size_t t = 0; t < len; ++t) {
    const double bound = std::pow(*rate, static_cast<double>(t)) * 2.0 * m;
    const double mean = st.distance[t] / R;
    margin = std::min(margin, bound - mean);
    if (mean > bound + radius) ok = false;
  }
  r.margin = margin;
  r.verdict = ok ? Verdict::pass : Verdict::fail;
  r.details["radius"] = radius;
  r.series.push_back(std::move(s));
  return r;
}

CheckReport variance_from(const IsingModel& model, std::span<const int> subset, const Matrix& cov,
                          const CoupledOptions& options, const CoupledStats& st, int limit) {
  auto r = coupled_report("variance_uniform", "Var(S_t) <= 2 R^2 / (1 - rho^2) <= 16|F| for all t", model, subset,
                          options, st);
  const auto m = static_cast<int>(subset.size());
  const double covsum = subset_covariance_sum(cov, subset);
  const auto rate = contraction_rate(covsum, m);
  const double R = static_cast<double>(st.replicas);
  const auto len = st.upper_sum.size();
  const double delta = (1.0 - options.confidence) / static_cast<double>(len);
  const double radius = hoeffding_radius(4.0 * m * m, st.replicas, delta);
  Series s{"variance", {}};
  double max_var = 0.0;
  for (std::size_t t = 0; t < len; ++t) {
    const double mean = st.upper_sum[t] / R;
    const double var = R > 1.0 ? (st.upper_sq[t] / R - mean * mean) * R / (R - 1.0) : 0.0;
    max_var = std::max(max_var, var);
    s.points.push_back({static_cast<double>(t), var, radius});
  }
  r.series.push_back(std::move(s));
  r.details["covariance_sum"] = covsum;
  r.details["max_variance"] = max_var;
  r.details["radius"] = radius;
  r.details["sixteen_f"] = 16.0 * m;

  const auto synth = synthetic_variance_check(m, st.horizon);
  r.details["synthetic"] = {{"sites", m}, {"max_variance", synth.max_variance}, {"bound", synth.bound}, {"holds", synth.holds}};
  Verdict v = synth.holds ? Verdict::pass : Verdict::fail;

  if (model.size() <= limit) {
    const auto law = sum_law(gibbs_distribution(model, limit), subset);
    double mean = 0.0, sq = 0.0;
    for (std::size_t j = 0; j < law.size(); ++j) {
      const double x = 2.0 * static_cast<double>(j) - m;
      mean += law[j] * x;
      sq += law[j] * x * x;
    }
    const double stat_var = sq - mean * mean;
    r.details["stationary_variance"] = stat_var;
    if (stat_var > 16.0 * m) v = worst(v, Verdict::fail);
  }

  if (!rate) {
    r.details["reason"] = "covariance sum over F is at least 1; no variance bound is licensed";
    r.margin = std::numeric_limits<double>::quiet_NaN();
    r.verdict = v == Verdict::fail ? Verdict::fail : Verdict::skipped;
    return r;
  }
  const double bound = 8.0 / (1.0 - *rate * *rate);
  r.details["rate"] = *rate;
  r.details["bound"] = bound;
  r.margin = bound - max_var;
  if (max_var > bound + radius) v = worst(v, Verdict::fail);
  r.verdict = v;
  return r;
}

CheckReport expectation_from(const IsingModel& model, std::span<const int> subset, const CoupledOptions& options,
                             const CoupledStats& st) {
  auto r = coupled_report("expectation_decay", "E_+ S_t >= |F| (1 - 1/|F|)^t", model, subset, options, st);
  const auto m = static_cast<int>(subset.size());
  const double R = static_cast<double>(st.replicas);
  const auto len = st.upper_sum.size();
  const double delta = (1.0 - options.confidence) / static_cast<double>(len);
  const double radius = hoeffding_radius(2.0 * m, st.replicas, delta);
  Series s{"mean_s", {}};
  double margin = std::numeric_limits<double>::infinity();
  double worst_z = std::numeric_limits<double>::infinity();
  bool ok = true;
  for (std::size_t t = 0; t < len; ++t) {
    const double mean = st.upper_sum[t] / R;
    const double bound = m * std::pow(1.0 - 1.0 / m, static_cast<double>(t));
    const double var = R > 1.0 ? (st.upper_sq[t] / R - mean * mean) * R / (R - 1.0) : 0.0;
    const double se = std::sqrt(std::max(var, 0.0) / R);
    margin = std::min(margin, mean - bound);
    if (se > 0.0) worst_z = std::min(worst_z, (mean - bound) / se);
    if (mean < bound - radius) ok = false;
    s.points.push_back({static_cast<double>(t), mean, radius});
  }
  r.series.push_back(std::move(s));
  r.margin = margin;
  r.verdict = ok ? Verdict::pass : Verdict::fail;
  r.details["radius"] = radius;
  r.details["worst_z"] = std::isfinite(worst_z) ? Json(worst_z) : Json(nullptr);
  return r;
}

}  // namespace

std::vector<CheckReport> check_coupled_suite(const IsingModel& model, std::span<const int> subset, const Matrix& cov,
                                             const CoupledOptions& options, std::span<const std::string> ids,
                                             int limit) {
  if (subset.empty()) throw InvalidInput("subset F is empty");
  if (cov.rows() != model.size() || cov.cols() != model.size())
    throw DimensionMismatch("covariance matrix does not match the model");
  const auto spec = ChainSpec::z_chain(model, std::vector<int>(subset.begin(), subset.end()), BlockMode::exact);
  const std::int64_t horizon = options.horizon > 0 ? options.horizon : default_horizon(subset.size());
  const auto st = simulate_coupled(spec, horizon, options.replicas, options.seed, options.workers);
  std::vector<CheckReport> out;
  for (const auto& id : ids) {
    if (id == "contraction")
      out.push_back(contraction_from(model, subset, cov, options, st));
    else if (id == "variance_uniform")
      out.push_back(variance_from(model, subset, cov, options, st, limit));
    else if (id == "expectation_decay")
      out.push_back(expectation_from(model, subset, options, st));
    else
      throw InvalidInput("unknown coupled check '" + id + "'");
  }
  return out;
}

CheckReport check_contraction(const IsingModel& model, std::span<const int> subset, const Matrix& cov,
                              const CoupledOptions& options) {
  const std::string id = "contraction";
  return check_coupled_suite(model, subset, cov, options, std::span<const std::string>(&id, 1)).front();
}

CheckReport check_variance_uniform(const IsingModel& model, std::span<const int> subset, const Matrix& cov,
                                   const CoupledOptions& options, int limit) {
  const std::string id = "variance_uniform";
  return check_coupled_suite(model, subset, cov, options, std::span<const std::string>(&id, 1), limit).front();
}

CheckReport check_expectation_decay(const IsingModel& model, std::span<const int> subset,
                                    const CoupledOptions& options) {
  const std::string id = "expectation_decay";
  const Matrix zero = Matrix::Zero(model.size(), model.size());
  return check_coupled_suite(model, subset, zero, options, std::span<const std::string>(&id, 1)).front();
}

}  // namespace mixlab
