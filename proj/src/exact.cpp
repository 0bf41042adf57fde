#include "mixlab/exact.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>

#include "mixlab/errors.hpp"

namespace mixlab {

namespace {

constexpr double kSumTolerance = 1e-12;

void require_capacity(int sites, int limit, const char* what) {
  const int cap = std::min(limit, kEnumHardCap);
  if (sites > cap)
    throw CapacityError(std::string(what) + ": " + std::to_string(sites) + " sites exceeds the enumeration limit " +
                        std::to_string(cap));
}

// Exponent of the Gibbs weight for configuration index x.
double log_weight_at(const IsingModel& model, std::uint64_t x) {
  double e = 0.0;
  for (const Edge& edge : model.edges()) {
    const bool same = (((x >> edge.u) ^ (x >> edge.v)) & 1U) == 0;
    e += same ? edge.coupling : -edge.coupling;
  }
  const auto& h = model.field();
  for (int v = 0; v < model.size(); ++v) e += ((x >> v) & 1U) ? h[v] : -h[v];
  return e;
}

inline int spin_at(std::uint64_t x, int v) { return ((x >> v) & 1U) ? 1 : -1; }

double local_field_at(const IsingModel& model, std::uint64_t x, int v) {
  double m = model.field_at(v);
  for (const Neighbor& nb : model.neighbors(v)) m += nb.coupling * spin_at(x, nb.vertex);
  return m;
}

}  // namespace

// ---------------------------------------------------------------------------
// DistributionTable

DistributionTable::DistributionTable(int sites, std::vector<double> probs, std::optional<double> log_partition)
    : sites_(sites), probs_(std::move(probs)), log_z_(log_partition) {
  if (sites < 0 || sites > kEnumHardCap) throw CapacityError("distribution table site count out of range");
  if (probs_.size() != (std::size_t{1} << sites))
    throw DimensionMismatch("table for " + std::to_string(sites) + " sites needs 2^" + std::to_string(sites) +
                            " entries");
  double total = 0.0;
  for (double p : probs_) {
    if (!(p >= 0.0)) throw InvalidInput("probabilities must be nonnegative");
    total += p;
  }
  if (std::abs(total - 1.0) > kSumTolerance)
    throw InvalidInput("probabilities sum to " + std::to_string(total) + ", not 1");
}

DistributionTable DistributionTable::point_mass(int sites, std::uint64_t index) {
  std::vector<double> p(std::size_t{1} << sites, 0.0);
  p.at(index) = 1.0;
  return DistributionTable(sites, std::move(p));
}

DistributionTable DistributionTable::uniform(int sites) {
  const std::size_t dim = std::size_t{1} << sites;
  return DistributionTable(sites, std::vector<double>(dim, 1.0 / static_cast<double>(dim)));
}

// ---------------------------------------------------------------------------
// Gibbs tables and moments

DistributionTable gibbs_distribution(const IsingModel& model, int limit) {
  const int n = model.size();
  require_capacity(n, limit, "gibbs_distribution");
  const std::size_t dim = std::size_t{1} << n;
  std::vector<double> logw(dim);
  double top = -INFINITY;
  for (std::size_t x = 0; x < dim; ++x) {
    logw[x] = log_weight_at(model, x);
    top = std::max(top, logw[x]);
  }
  double total = 0.0;
  for (std::size_t x = 0; x < dim; ++x) {
    logw[x] = std::exp(logw[x] - top);
    total += logw[x];
  }
  for (double& p : logw) p /= total;
  return DistributionTable(n, std::move(logw), top + std::log(total));
}

Moments moments(const DistributionTable& dist) {
  const int n = dist.sites();
  Moments out;
  out.magnetization.assign(static_cast<std::size_t>(n), 0.0);
  Matrix second = Matrix::Zero(n, n);
  for (std::size_t x = 0; x < dist.size(); ++x) {
    const double p = dist[x];
    if (p == 0.0) continue;
    for (int u = 0; u < n; ++u) {
      const int su = spin_at(x, u);
      out.magnetization[u] += p * su;
      for (int v = u + 1; v < n; ++v) second(u, v) += p * su * spin_at(x, v);
    }
  }
  out.covariance = Matrix::Zero(n, n);
  for (int u = 0; u < n; ++u) {
    out.covariance(u, u) = 1.0 - out.magnetization[u] * out.magnetization[u];
    for (int v = u + 1; v < n; ++v) {
      const double c = second(u, v) - out.magnetization[u] * out.magnetization[v];
      out.covariance(u, v) = c;
      out.covariance(v, u) = c;
    }
  }
  return out;
}

std::vector<double> magnetizations(const IsingModel& model, int limit) {
  const int n = model.size();
  require_capacity(n, limit, "magnetizations");
  const std::size_t dim = std::size_t{1} << n;
  std::vector<double> logw(dim);
  double top = -INFINITY;
  for (std::size_t x = 0; x < dim; ++x) {
    logw[x] = log_weight_at(model, x);
    top = std::max(top, logw[x]);
  }
  double total = 0.0;
  std::vector<double> m(static_cast<std::size_t>(n), 0.0);
  for (std::size_t x = 0; x < dim; ++x) {
    const double w = std::exp(logw[x] - top);
    total += w;
    for (int v = 0; v < n; ++v) m[v] += w * spin_at(x, v);
  }
  for (double& x : m) x /= total;
  return m;
}

double conditional_magnetization(const IsingModel& model, int u, std::span<const Clamp> clamped, int limit) {
  const int n = model.size();
  require_capacity(n, limit, "conditional_magnetization");
  if (u < 0 || u >= n) throw InvalidInput("vertex out of range");
  std::uint64_t fixed_mask = 0;
  std::uint64_t fixed_bits = 0;
  for (const Clamp& c : clamped) {
    if (c.vertex < 0 || c.vertex >= n) throw InvalidInput("clamped vertex out of range");
    if (c.spin != 1 && c.spin != -1) throw InvalidInput("clamped spin must be +1 or -1");
    if (c.vertex == u) throw InvalidInput("the target vertex cannot be clamped");
    const std::uint64_t bit = std::uint64_t{1} << c.vertex;
    if ((fixed_mask & bit) && (((fixed_bits & bit) != 0) != (c.spin > 0)))
      throw InvalidInput("contradictory clamps on one vertex");
    fixed_mask |= bit;
    if (c.spin > 0) fixed_bits |= bit;
  }
  std::vector<int> free_sites;
  for (int v = 0; v < n; ++v)
    if (!(fixed_mask & (std::uint64_t{1} << v))) free_sites.push_back(v);

  const std::size_t count = std::size_t{1} << free_sites.size();
  std::vector<double> logw(count);
  std::vector<int> su(count);
  double top = -INFINITY;
  for (std::size_t k = 0; k < count; ++k) {
    std::uint64_t x = fixed_bits;
    for (std::size_t b = 0; b < free_sites.size(); ++b)
      if ((k >> b) & 1U) x |= std::uint64_t{1} << free_sites[b];
    logw[k] = log_weight_at(model, x);
    su[k] = spin_at(x, u);
    top = std::max(top, logw[k]);
  }
  double num = 0.0;
  double den = 0.0;
  for (std::size_t k = 0; k < count; ++k) {
    const double w = std::exp(logw[k] - top);
    den += w;
    num += w * su[k];
  }
  return num / den;
}

std::vector<double> magnetization_second_partials(const IsingModel& model, int u, int w, double h, int limit) {
  const int n = model.size();
  if (u < 0 || u >= n || w < 0 || w >= n) throw InvalidInput("vertex out of range");
  if (!(h >= 1e-6)) throw InvalidInput("finite-difference step must be at least 1e-6");
  for (double x : model.field())
    if (x < 0.0) throw InvalidInput("second partials are taken at a nonnegative field");
  require_capacity(n, limit, "magnetization_second_partials");

  auto shifted = [&](double du, double dw) {
    std::vector<double> f = model.field();
    f[u] += du;
    f[w] += dw;
    return magnetizations(model.with_field(std::move(f)), limit);
  };
  std::vector<double> out(static_cast<std::size_t>(n));
  if (u == w) {
    const auto plus = shifted(h, 0.0);
    const auto mid = magnetizations(model, limit);
    const auto minus = shifted(-h, 0.0);
    for (int v = 0; v < n; ++v) out[v] = (plus[v] - 2.0 * mid[v] + minus[v]) / (h * h);
  } else {
    const auto pp = shifted(h, h);
    const auto pm = shifted(h, -h);
    const auto mp = shifted(-h, h);
    const auto mm = shifted(-h, -h);
    for (int v = 0; v < n; ++v) out[v] = (pp[v] - pm[v] - mp[v] + mm[v]) / (4.0 * h * h);
  }
  return out;
}

double ghs_second_derivative(const IsingModel& model, int v, int u, int w, double h, int limit) {
  if (v < 0 || v >= model.size()) throw InvalidInput("vertex out of range");
  return magnetization_second_partials(model, u, w, h, limit)[static_cast<std::size_t>(v)];
}

// ---------------------------------------------------------------------------
// Transition matrices

TransitionMatrix::TransitionMatrix(std::vector<std::size_t> offsets, std::vector<Entry> entries,
                                   DistributionTable stationary, bool heat_bath)
    : row_offset_(std::move(offsets)),
      entries_(std::move(entries)),
      stationary_(std::move(stationary)),
      heat_bath_(heat_bath) {
  if (dim() != stationary_.size()) throw DimensionMismatch("kernel and stationary law differ in dimension");
  for (std::size_t x = 0; x < dim(); ++x) {
    auto* b = entries_.data() + row_offset_[x];
    auto* e = entries_.data() + row_offset_[x + 1];
    std::sort(b, e, [](const Entry& a, const Entry& c) { return a.col < c.col; });
    double s = 0.0;
    for (auto* it = b; it != e; ++it) {
      if (it->prob < 0.0) throw InvalidInput("transition probabilities must be nonnegative");
      s += it->prob;
    }
    row_error_ = std::max(row_error_, std::abs(s - 1.0));
  }
  const auto& pi = stationary_.probs();
  for (std::size_t x = 0; x < dim(); ++x)
    for (const Entry& e : row(x))
      balance_residual_ = std::max(balance_residual_, std::abs(pi[x] * e.prob - pi[e.col] * at(e.col, x)));
  reversible_ = row_error_ <= 1e-12 && balance_residual_ < 1e-10;
}

double TransitionMatrix::at(std::size_t x, std::size_t y) const {
  const auto r = row(x);
  auto it = std::lower_bound(r.begin(), r.end(), y, [](const Entry& e, std::size_t c) { return e.col < c; });
  return (it != r.end() && it->col == y) ? it->prob : 0.0;
}

TransitionMatrix TransitionMatrix::from_dense(const Matrix& p, DistributionTable stationary) {
  if (p.rows() != p.cols()) throw DimensionMismatch("transition matrix must be square");
  std::vector<std::size_t> offsets{0};
  std::vector<Entry> entries;
  for (Eigen::Index x = 0; x < p.rows(); ++x) {
    for (Eigen::Index y = 0; y < p.cols(); ++y)
      if (p(x, y) != 0.0) entries.push_back({static_cast<std::uint32_t>(y), p(x, y)});
    offsets.push_back(entries.size());
  }
  return TransitionMatrix(std::move(offsets), std::move(entries), std::move(stationary), false);
}

Matrix TransitionMatrix::dense() const {
  const auto d = static_cast<Eigen::Index>(dim());
  Matrix m = Matrix::Zero(d, d);
  for (std::size_t x = 0; x < dim(); ++x)
    for (const Entry& e : row(x)) m(static_cast<Eigen::Index>(x), e.col) = e.prob;
  return m;
}

std::vector<double> TransitionMatrix::step(std::span<const double> q) const {
  if (q.size() != dim()) throw DimensionMismatch("row vector length differs from the kernel dimension");
  std::vector<double> out(dim(), 0.0);
  for (std::size_t x = 0; x < dim(); ++x) {
    const double mass = q[x];
    if (mass == 0.0) continue;
    for (const Entry& e : row(x)) out[e.col] += mass * e.prob;
  }
  return out;
}

TransitionMatrix glauber_transition_matrix(const IsingModel& model, int limit) {
  const int n = model.size();
  require_capacity(n, limit, "glauber_transition_matrix");
  const std::size_t dim = std::size_t{1} << n;
  const double inv_n = 1.0 / n;
  std::vector<std::size_t> offsets(dim + 1);
  std::vector<TransitionMatrix::Entry> entries;
  entries.reserve(dim * static_cast<std::size_t>(n + 1));
  for (std::size_t x = 0; x < dim; ++x) {
    offsets[x] = entries.size();
    double stay = 0.0;
    entries.push_back({static_cast<std::uint32_t>(x), 0.0});
    const std::size_t diag = entries.size() - 1;
    for (int v = 0; v < n; ++v) {
      const double p_plus = plus_probability_from_field(local_field_at(model, x, v));
      const bool plus = (x >> v) & 1U;
      const double flip = plus ? 1.0 - p_plus : p_plus;
      stay += (1.0 - flip) * inv_n;
      if (flip > 0.0) entries.push_back({static_cast<std::uint32_t>(x ^ (std::size_t{1} << v)), flip * inv_n});
    }
    entries[diag].prob = stay;
  }
  offsets[dim] = entries.size();
  return TransitionMatrix(std::move(offsets), std::move(entries), gibbs_distribution(model, limit), true);
}

// ---------------------------------------------------------------------------
// Spectra

namespace {

// Symmetrized kernel A(x,y) = pi(x) P(x,y) / sqrt(pi(x) pi(y)).
Matrix symmetrized(const TransitionMatrix& p) {
  const auto& pi = p.stationary().probs();
  const auto d = static_cast<Eigen::Index>(p.dim());
  Matrix a = Matrix::Zero(d, d);
  for (std::size_t x = 0; x < p.dim(); ++x)
    for (const auto& e : p.row(x)) a(static_cast<Eigen::Index>(x), e.col) = pi[x] * e.prob / std::sqrt(pi[x] * pi[e.col]);
  return (a + a.transpose()) * 0.5;
}

// Eigenpairs of a symmetric matrix in descending order. Small problems are
// solved in extended precision so that tiny gaps keep their relative accuracy.
void symmetric_eigen(const Matrix& a, std::vector<long double>& values,
                     Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>& vectors) {
  using LMatrix = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
  const Eigen::Index d = a.rows();
  LMatrix vec;
  Eigen::Matrix<long double, Eigen::Dynamic, 1> val;
  if (d <= 256) {
    Eigen::SelfAdjointEigenSolver<LMatrix> solver(a.cast<long double>());
    if (solver.info() != Eigen::Success) throw std::runtime_error("eigensolver did not converge");
    val = solver.eigenvalues();
    vec = solver.eigenvectors();
  } else {
    Eigen::SelfAdjointEigenSolver<Matrix> solver(a);
    if (solver.info() != Eigen::Success) throw std::runtime_error("eigensolver did not converge");
    val = solver.eigenvalues().cast<long double>();
    vec = solver.eigenvectors().cast<long double>();
  }
  values.resize(static_cast<std::size_t>(d));
  vectors.resize(d, d);
  for (Eigen::Index k = 0; k < d; ++k) {
    values[static_cast<std::size_t>(k)] = val(d - 1 - k);
    vectors.col(k) = vec.col(d - 1 - k);
  }
}

// Replaces each 1 - lambda_k by the Dirichlet-form Rayleigh quotient of its
// eigenvector: a sum of nonnegative terms, so tiny gaps keep their relative
// accuracy where 1 - lambda from the eigensolver would cancel. Errors in the
// vector enter only quadratically. Pairs are re-sorted by the refined gaps.
void refine_gaps(const TransitionMatrix& p, std::vector<long double>& values,
                 Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>& vectors, std::vector<long double>& gaps) {
  const auto& pi = p.stationary().probs();
  const std::size_t d = p.dim();
  std::vector<long double> root(d);
  for (std::size_t x = 0; x < d; ++x) root[x] = std::sqrt(static_cast<long double>(pi[x]));
  // The top vector is sqrt(pi) exactly. When lambda_2 sits within rounding of
  // 1 the solver mixes the two; projecting it back out restores the symmetry
  // of the slow mode.
  for (std::size_t x = 0; x < d; ++x) vectors(static_cast<Eigen::Index>(x), 0) = root[x];
  const auto top = vectors.col(0);
  const long double top_norm = top.squaredNorm();
  for (std::size_t k = 1; k < d; ++k) {
    auto col = vectors.col(static_cast<Eigen::Index>(k));
    col -= (col.dot(top) / top_norm) * top;
    col /= col.norm();
  }
  vectors.col(0) /= std::sqrt(top_norm);
  gaps.assign(d, 0.0L);
  for (std::size_t k = 1; k < d; ++k) {
    const auto col = vectors.col(static_cast<Eigen::Index>(k));
    long double form = 0.0L, norm = 0.0L;
    for (std::size_t x = 0; x < d; ++x) {
      const long double fx = col(static_cast<Eigen::Index>(x)) / root[x];
      norm += col(static_cast<Eigen::Index>(x)) * col(static_cast<Eigen::Index>(x));
      long double row = 0.0L;
      for (const auto& e : p.row(x)) {
        const long double diff = fx - col(e.col) / root[e.col];
        row += diff * diff * e.prob;
      }
      form += pi[x] * row;
    }
    gaps[k] = 0.5L * form / norm;
  }
  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin() + 1, order.end(), [&](std::size_t a, std::size_t b) { return gaps[a] < gaps[b]; });
  Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic> sorted(vectors.rows(), vectors.cols());
  std::vector<long double> sorted_gaps(d);
  for (std::size_t k = 0; k < d; ++k) {
    sorted.col(static_cast<Eigen::Index>(k)) = vectors.col(static_cast<Eigen::Index>(order[k]));
    sorted_gaps[k] = gaps[order[k]];
  }
  vectors = std::move(sorted);
  gaps = std::move(sorted_gaps);
  for (std::size_t k = 0; k < d; ++k) values[k] = 1.0L - gaps[k];
}

bool is_increasing(std::span<const double> f, int sites, double tol) {
  for (std::size_t x = 0; x < f.size(); ++x)
    for (int v = 0; v < sites; ++v)
      if (!((x >> v) & 1U) && f[x] > f[x | (std::size_t{1} << v)] + tol) return false;
  return true;
}

void finish_second_eigenfunction(SpectralData& out, int sites) {
  auto& f = out.second_eigenfunction;
  double top = 0.0;
  std::size_t arg = 0;
  for (std::size_t i = 0; i < f.size(); ++i)
    if (std::abs(f[i]) > top) {
      top = std::abs(f[i]);
      arg = i;
    }
  if (top > 0.0) {
    const double scale = (f[arg] < 0.0 ? -1.0 : 1.0) / top;
    for (double& x : f) x *= scale;
  }
  if (out.second_multiplicity == 1) {
    if (is_increasing(f, sites, 1e-9)) {
      out.second_eigenfunction_increasing = true;
    } else {
      std::vector<double> neg(f.size());
      std::transform(f.begin(), f.end(), neg.begin(), [](double x) { return -x; });
      if (is_increasing(neg, sites, 1e-9)) {
        f = std::move(neg);
        out.second_eigenfunction_increasing = true;
      } else {
        out.second_eigenfunction_increasing = false;
      }
    }
  }
}

SpectralData power_second_eigen(const TransitionMatrix& p, const SpectralOptions& options) {
  const auto& pi = p.stationary().probs();
  const std::size_t d = p.dim();
  std::vector<double> top(d), sq(d);
  for (std::size_t x = 0; x < d; ++x) sq[x] = std::sqrt(pi[x]);
  top = sq;
  auto apply = [&](const std::vector<double>& v) {
    std::vector<double> out(d, 0.0);
    for (std::size_t x = 0; x < d; ++x) {
      double s = 0.0;
      for (const auto& e : p.row(x)) s += e.prob * v[e.col] / sq[e.col];
      out[x] = sq[x] * s;
    }
    return out;
  };
  auto deflate_normalize = [&](std::vector<double>& v) {
    double dot = 0.0;
    for (std::size_t x = 0; x < d; ++x) dot += v[x] * top[x];
    double norm = 0.0;
    for (std::size_t x = 0; x < d; ++x) {
      v[x] -= dot * top[x];
      norm += v[x] * v[x];
    }
    norm = std::sqrt(norm);
    for (double& x : v) x /= norm;
  };
  std::vector<double> v(d);
  for (std::size_t x = 0; x < d; ++x) v[x] = std::sin(1.0 + static_cast<double>(x) * 0.7548776662466927);
  deflate_normalize(v);
  double lambda = 0.0;
  for (int it = 0; it < options.power_iterations; ++it) {
    auto w = apply(v);
    double rq = 0.0;
    for (std::size_t x = 0; x < d; ++x) rq += v[x] * w[x];
    deflate_normalize(w);
    v = std::move(w);
    if (it > 10 && std::abs(rq - lambda) < 1e-15) {
      lambda = rq;
      break;
    }
    lambda = rq;
  }
  // Same Rayleigh-quotient refinement as the dense path.
  long double form = 0.0L, norm = 0.0L;
  for (std::size_t x = 0; x < d; ++x) {
    const long double fx = v[x] / sq[x];
    norm += static_cast<long double>(v[x]) * v[x];
    long double row = 0.0L;
    for (const auto& e : p.row(x)) {
      const long double diff = fx - v[e.col] / sq[e.col];
      row += diff * diff * e.prob;
    }
    form += pi[x] * row;
  }
  const double gap = static_cast<double>(0.5L * form / norm);
  SpectralData out;
  out.eigenvalues = {1.0, 1.0 - gap};
  out.gap = gap;
  out.full_spectrum = false;
  out.second_multiplicity = 0;
  out.second_eigenfunction.resize(d);
  for (std::size_t x = 0; x < d; ++x) out.second_eigenfunction[x] = v[x] / sq[x];
  finish_second_eigenfunction(out, p.sites());
  return out;
}

}  // namespace

SpectralData spectral_data(const TransitionMatrix& p, const SpectralOptions& options) {
  if (!p.reversible())
    throw InvalidInput("spectral_data needs a reversible kernel (detailed-balance residual " +
                       std::to_string(p.detailed_balance_residual()) + ")");
  if (p.dim() > options.dense_limit) return power_second_eigen(p, options);

  std::vector<long double> values, gaps;
  Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic> vectors;
  symmetric_eigen(symmetrized(p), values, vectors);
  refine_gaps(p, values, vectors, gaps);

  SpectralData out;
  out.eigenvalues.assign(values.begin(), values.end());
  if (std::abs(out.eigenvalues.front() - 1.0) > 1e-9)
    throw std::logic_error("top eigenvalue of a stochastic kernel is not 1");
  if (p.heat_bath() && out.eigenvalues.back() < -1e-9)
    throw std::logic_error("heat-bath kernel produced a negative eigenvalue");

  const auto& pi = p.stationary().probs();
  if (values.size() == 1) {
    out.gap = 1.0;
    out.second_multiplicity = 0;
    out.second_eigenfunction.assign(1, 0.0);
    return out;
  }
  out.gap = static_cast<double>(gaps[1]);
  int mult = 0;
  for (std::size_t k = 1; k < gaps.size(); ++k)
    if (std::abs(static_cast<double>(gaps[k] - gaps[1])) <= options.multiplicity_tol) ++mult;
  out.second_multiplicity = mult;
  out.second_eigenfunction.resize(p.dim());
  for (std::size_t x = 0; x < p.dim(); ++x)
    out.second_eigenfunction[x] = static_cast<double>(vectors(static_cast<Eigen::Index>(x), 1)) / std::sqrt(pi[x]);
  finish_second_eigenfunction(out, p.sites());
  return out;
}

SpectralDecomposition::SpectralDecomposition(const TransitionMatrix& p) : pi_(p.stationary().probs()) {
  if (!p.reversible()) throw InvalidInput("spectral decomposition needs a reversible kernel");
  symmetric_eigen(symmetrized(p), values_, vectors_);
  refine_gaps(p, values_, vectors_, gaps_);
}

double SpectralDecomposition::tv_from(std::size_t x, std::uint64_t t) const {
  const auto d = static_cast<Eigen::Index>(pi_.size());
  const auto xi = static_cast<Eigen::Index>(x);
  Eigen::Matrix<long double, Eigen::Dynamic, 1> coeff(d);
  coeff(0) = 0.0L;  // stationary component removed
  for (Eigen::Index k = 1; k < d; ++k) {
    // lambda^t as exp(t log1p(-gap)) so the gap, not 1 - gap, carries the precision.
    const long double g = gaps_[static_cast<std::size_t>(k)];
    const long double pw =
        (t == 0) ? 1.0L : (g >= 1.0L ? 0.0L : std::exp(static_cast<long double>(t) * std::log1p(-g)));
    coeff(k) = pw * vectors_(xi, k);
  }
  const Eigen::Matrix<long double, Eigen::Dynamic, 1> dev = vectors_ * coeff;
  const long double sx = std::sqrt(static_cast<long double>(pi_[x]));
  long double total = 0.0L;
  for (Eigen::Index y = 0; y < d; ++y)
    total += std::abs(std::sqrt(static_cast<long double>(pi_[static_cast<std::size_t>(y)])) / sx * dev(y));
  return static_cast<double>(0.5L * total);
}

// ---------------------------------------------------------------------------
// Functionals and distances

double dirichlet_form(const TransitionMatrix& p, const DistributionTable& pi, std::span<const double> f) {
  if (f.size() != p.dim() || pi.size() != p.dim()) throw DimensionMismatch("dirichlet_form dimensions differ");
  double total = 0.0;
  for (std::size_t x = 0; x < p.dim(); ++x) {
    double row = 0.0;
    for (const auto& e : p.row(x)) {
      const double diff = f[x] - f[e.col];
      row += diff * diff * e.prob;
    }
    total += pi[x] * row;
  }
  return 0.5 * total;
}

double expectation(const DistributionTable& pi, std::span<const double> f) {
  if (f.size() != pi.size()) throw DimensionMismatch("function and table differ in length");
  double s = 0.0;
  for (std::size_t x = 0; x < f.size(); ++x) s += pi[x] * f[x];
  return s;
}

double variance(const DistributionTable& pi, std::span<const double> f) {
  const double mean = expectation(pi, f);
  double s = 0.0;
  for (std::size_t x = 0; x < f.size(); ++x) s += pi[x] * (f[x] - mean) * (f[x] - mean);
  return s;
}

std::vector<double> sum_of_spins_table(int sites) {
  std::vector<double> s(std::size_t{1} << sites);
  for (std::size_t x = 0; x < s.size(); ++x) s[x] = 2.0 * std::popcount(x) - sites;
  return s;
}

double tv_distance(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw DimensionMismatch("tv_distance: dimensions differ");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
  return std::min(1.0, 0.5 * s);
}

double tv_distance(const DistributionTable& p, const DistributionTable& q) {
  if (p.sites() != q.sites()) throw DimensionMismatch("tv_distance: site counts differ");
  return tv_distance(p.probs(), q.probs());
}

std::vector<double> exact_tv_curve(const IsingModel& model, const SpinConfig& start, std::int64_t horizon,
                                   int limit) {
  if (horizon < 0) throw InvalidInput("horizon must be nonnegative");
  if (start.size() != model.size()) throw DimensionMismatch("start configuration has the wrong length");
  const auto kernel = glauber_transition_matrix(model, limit);
  const auto& pi = kernel.stationary().probs();
  std::vector<double> q(kernel.dim(), 0.0);
  q[start.index()] = 1.0;
  std::vector<double> curve;
  curve.reserve(static_cast<std::size_t>(horizon) + 1);
  curve.push_back(tv_distance(q, pi));
  for (std::int64_t t = 1; t <= horizon; ++t) {
    q = kernel.step(q);
    curve.push_back(tv_distance(q, pi));
  }
  return curve;
}

MixingTimeInfo exact_mixing_time_info(const IsingModel& model, const SpinConfig& start, const MixingOptions& options) {
  if (start.size() != model.size()) throw DimensionMismatch("start configuration has the wrong length");
  if (!(options.threshold > 0.0 && options.threshold < 1.0)) throw InvalidInput("threshold must lie in (0, 1)");
  const auto kernel = glauber_transition_matrix(model, options.limit);
  const auto& pi = kernel.stationary().probs();
  const std::size_t x0 = start.index();
  std::vector<double> q(kernel.dim(), 0.0);
  q[x0] = 1.0;
  if (tv_distance(q, pi) <= options.threshold) return {0, false};

  const auto max_direct =
      static_cast<std::int64_t>(std::max(1.0, options.direct_work / static_cast<double>(kernel.nonzeros())));
  std::int64_t t = 0;
  while (t < max_direct) {
    q = kernel.step(q);
    ++t;
    if (tv_distance(q, pi) <= options.threshold) return {t, false};
  }

  // TV from a fixed start is nonincreasing, so bisection on the spectral
  // representation is valid past the direct horizon.
  const SpectralDecomposition decomposition(kernel);
  std::uint64_t lo = static_cast<std::uint64_t>(t);
  std::uint64_t hi = 2 * lo;
  while (decomposition.tv_from(x0, hi) > options.threshold) {
    lo = hi;
    if (hi > (std::uint64_t{1} << 61)) throw HorizonExceeded("mixing time exceeds 2^62 steps");
    hi *= 2;
  }
  while (hi - lo > 1) {
    const std::uint64_t mid = lo + (hi - lo) / 2;
    if (decomposition.tv_from(x0, mid) > options.threshold)
      lo = mid;
    else
      hi = mid;
  }
  return {static_cast<std::int64_t>(hi), true};
}

std::int64_t exact_mixing_time(const IsingModel& model, const SpinConfig& start, const MixingOptions& options) {
  return exact_mixing_time_info(model, start, options).time;
}

// ---------------------------------------------------------------------------
// Projections, updates, stochastic order

DistributionTable project_distribution(const DistributionTable& dist, std::span<const int> subset) {
  if (subset.empty()) throw InvalidInput("projection needs a nonempty site subset");
  std::vector<bool> used(static_cast<std::size_t>(dist.sites()), false);
  for (int v : subset) {
    if (v < 0 || v >= dist.sites()) throw InvalidInput("projection site out of range");
    if (used[v]) throw InvalidInput("projection site listed twice");
    used[v] = true;
  }
  const int k = static_cast<int>(subset.size());
  std::vector<double> out(std::size_t{1} << k, 0.0);
  for (std::size_t x = 0; x < dist.size(); ++x) {
    std::size_t y = 0;
    for (int b = 0; b < k; ++b)
      if ((x >> subset[b]) & 1U) y |= std::size_t{1} << b;
    out[y] += dist[x];
  }
  // Renormalize the accumulated marginal; the input already sums to 1.
  const double total = std::accumulate(out.begin(), out.end(), 0.0);
  for (double& p : out) p /= total;
  return DistributionTable(k, std::move(out));
}

std::vector<double> sum_law(const DistributionTable& dist, std::span<const int> subset) {
  std::vector<int> all;
  if (subset.empty()) {
    all.resize(static_cast<std::size_t>(dist.sites()));
    std::iota(all.begin(), all.end(), 0);
    subset = all;
  }
  std::uint64_t mask = 0;
  for (int v : subset) {
    if (v < 0 || v >= dist.sites()) throw InvalidInput("site out of range");
    mask |= std::uint64_t{1} << v;
  }
  std::vector<double> law(subset.size() + 1, 0.0);
  for (std::size_t x = 0; x < dist.size(); ++x) law[static_cast<std::size_t>(std::popcount(x & mask))] += dist[x];
  return law;
}

DistributionTable single_site_update(const IsingModel& model, int v, const DistributionTable& dist) {
  if (dist.sites() != model.size()) throw DimensionMismatch("table and model differ in site count");
  if (v < 0 || v >= model.size()) throw InvalidInput("vertex out of range");
  const std::size_t bit = std::size_t{1} << v;
  std::vector<double> out(dist.size(), 0.0);
  for (std::size_t x = 0; x < dist.size(); ++x) {
    if (x & bit) continue;
    const double mass = dist[x] + dist[x | bit];
    const double p = plus_probability_from_field(local_field_at(model, x, v));
    out[x | bit] = mass * p;
    out[x] = mass * (1.0 - p);
  }
  return DistributionTable(dist.sites(), std::move(out));
}

const std::vector<std::uint32_t>& increasing_events(int sites) {
  if (sites < 0 || sites > 5) throw CapacityError("increasing events are enumerated for at most 5 sites");
  static const std::vector<std::vector<std::uint32_t>> table = [] {
    std::vector<std::vector<std::uint32_t>> t(6);
    t[0] = {0U, 1U};
    for (int n = 1; n <= 5; ++n) {
      const std::uint32_t half = 1U << (n - 1);
      for (std::uint32_t low : t[n - 1])
        for (std::uint32_t high : t[n - 1])
          if ((low & ~high) == 0U) t[n].push_back(low | (high << half));
    }
    return t;
  }();
  return table[static_cast<std::size_t>(sites)];
}

double dominance_margin(const DistributionTable& p, const DistributionTable& q) {
  if (p.sites() != q.sites()) throw DimensionMismatch("dominance: site counts differ");
  double worst = INFINITY;
  for (std::uint32_t event : increasing_events(p.sites())) {
    double diff = 0.0;
    for (std::size_t x = 0; x < p.size(); ++x)
      if ((event >> x) & 1U) diff += p[x] - q[x];
    worst = std::min(worst, diff);
  }
  return worst;
}

bool stochastically_dominates(const DistributionTable& p, const DistributionTable& q) {
  return dominance_margin(p, q) >= -1e-12;
}

SampledDominance sampled_dominance(const DistributionTable& p, const DistributionTable& q, int events,
                                   RngStream& rng) {
  if (p.sites() != q.sites()) throw DimensionMismatch("dominance: site counts differ");
  if (p.sites() > kDefaultEnumLimit) throw CapacityError("sampled dominance supports at most 12 sites");
  SampledDominance out;
  out.worst_margin = INFINITY;
  for (int e = 0; e < events; ++e) {
    const int gens = 1 + static_cast<int>(rng.index(4));
    std::vector<std::size_t> g(static_cast<std::size_t>(gens));
    for (auto& x : g) x = rng.index(p.size());
    double diff = 0.0;
    for (std::size_t y = 0; y < p.size(); ++y)
      for (std::size_t x : g)
        if ((y & x) == x) {
          diff += p[y] - q[y];
          break;
        }
    out.worst_margin = std::min(out.worst_margin, diff);
    ++out.events;
  }
  out.consistent = out.worst_margin >= -1e-12;
  return out;
}

}  // namespace mixlab
