#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "mixlab/errors.hpp"
#include "mixlab/io.hpp"

namespace mixlab {

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

[[noreturn]] void line_error(int line, const std::string& what) {
  throw InvalidInput("line " + std::to_string(line) + ": " + what);
}

long long parse_int(std::string_view s, int line, const char* what) {
  long long v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    line_error(line, std::string("expected an integer ") + what + ", got '" + std::string(s) + "'");
  return v;
}

double parse_real(std::string_view s, int line, const char* what) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v))
    line_error(line, std::string("expected a finite number ") + what + ", got '" + std::string(s) + "'");
  return v;
}

std::string format_real(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

IsingModel parse_model_text(std::string_view text) {
  std::optional<int> n;
  std::vector<Edge> edges;
  std::vector<std::pair<int, double>> fields;
  std::set<int> field_seen;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const auto tok = split_ws(line);
    if (tok.empty()) {
      if (end == text.size()) break;
      continue;
    }
    const std::string_view key = tok[0];
    if (key == "n") {
      if (tok.size() != 2) line_error(line_no, "expected 'n <count>'");
      if (n) line_error(line_no, "vertex count given twice");
      const long long v = parse_int(tok[1], line_no, "vertex count");
      if (v < 1 || v > 1000000) line_error(line_no, "vertex count must lie in [1, 1000000]");
      n = static_cast<int>(v);
    } else if (key == "e") {
      if (tok.size() != 4) line_error(line_no, "expected 'e <u> <v> <J>'");
      if (!n) line_error(line_no, "edge before the 'n' line");
      const long long u = parse_int(tok[1], line_no, "vertex");
      const long long v = parse_int(tok[2], line_no, "vertex");
      const double j = parse_real(tok[3], line_no, "coupling");
      if (u < 0 || u >= *n || v < 0 || v >= *n) line_error(line_no, "vertex out of range");
      if (j < 0.0)
        line_error(line_no, "negative coupling " + std::string(tok[3]) +
                                " rejected: the model must be ferromagnetic (J >= 0)");
      edges.push_back({static_cast<int>(u), static_cast<int>(v), j});
    } else if (key == "h") {
      if (tok.size() != 3) line_error(line_no, "expected 'h <v> <H>'");
      if (!n) line_error(line_no, "field before the 'n' line");
      const long long v = parse_int(tok[1], line_no, "vertex");
      const double h = parse_real(tok[2], line_no, "field");
      if (v < 0 || v >= *n) line_error(line_no, "vertex out of range");
      if (!field_seen.insert(static_cast<int>(v)).second) line_error(line_no, "field given twice for one vertex");
      fields.emplace_back(static_cast<int>(v), h);
    } else {
      line_error(line_no, "unknown record '" + std::string(key) + "'");
    }
    if (end == text.size()) break;
  }
  if (!n) throw InvalidInput("model file has no 'n' line");
  std::vector<double> field(static_cast<std::size_t>(*n), 0.0);
  for (const auto& [v, h] : fields) field[v] = h;
  try {
    return IsingModel(*n, std::move(edges), std::move(field));
  } catch (const InvalidInput& e) {
    throw InvalidInput(std::string("invalid model: ") + e.what());
  }
}

IsingModel parse_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open model file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_model_text(ss.str());
}

std::string write_model(const IsingModel& model) {
  std::string out = "n " + std::to_string(model.size()) + "\n";
  for (const auto& e : model.edges())
    out += "e " + std::to_string(e.u) + " " + std::to_string(e.v) + " " + format_real(e.coupling) + "\n";
  for (int v = 0; v < model.size(); ++v)
    if (model.field_at(v) != 0.0) out += "h " + std::to_string(v) + " " + format_real(model.field_at(v)) + "\n";
  return out;
}

GeneratorSpec parse_generator(std::string_view spec) {
  if (spec.substr(0, 4) == "gen:") spec.remove_prefix(4);
  GeneratorSpec out;
  const auto colon = spec.find(':');
  out.kind = std::string(spec.substr(0, colon));
  if (out.kind.empty()) throw InvalidInput("generator spec has no kind");
  if (colon == std::string_view::npos) return out;
  std::string_view rest = spec.substr(colon + 1);
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    const std::string_view item = rest.substr(0, comma);
    rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string_view::npos || eq == 0) throw InvalidInput("generator parameter '" + std::string(item) + "' is not key=value");
    const std::string key(item.substr(0, eq));
    std::string_view val = item.substr(eq + 1);
    double v = 0.0;
    auto [p, ec] = std::from_chars(val.data(), val.data() + val.size(), v);
    if (ec != std::errc() || p != val.data() + val.size() || !std::isfinite(v))
      throw InvalidInput("generator parameter '" + key + "' is not a finite number");
    if (!out.params.emplace(key, v).second) throw InvalidInput("generator parameter '" + key + "' given twice");
  }
  return out;
}

namespace {

class Params {
 public:
  explicit Params(const GeneratorSpec& spec) : spec_(spec) {}

  double real(const std::string& key, std::optional<double> fallback = {}) {
    used_.insert(key);
    auto it = spec_.params.find(key);
    if (it != spec_.params.end()) return it->second;
    if (fallback) return *fallback;
    throw InvalidInput("generator '" + spec_.kind + "' needs parameter '" + key + "'");
  }

  int count(const std::string& key, int min, std::optional<int> fallback = {}) {
    const double v = real(key, fallback ? std::optional<double>(*fallback) : std::nullopt);
    if (v != std::floor(v) || v < min || v > 1000000)
      throw InvalidInput("generator parameter '" + key + "' must be an integer >= " + std::to_string(min));
    return static_cast<int>(v);
  }

  bool has(const std::string& key) const { return spec_.params.count(key) > 0; }

  void finish() const {
    for (const auto& [k, v] : spec_.params)
      if (!used_.count(k)) throw InvalidInput("generator '" + spec_.kind + "' does not take parameter '" + k + "'");
  }

 private:
  const GeneratorSpec& spec_;
  std::set<std::string> used_;
};

double coupling_param(Params& p, double fallback = 1.0) {
  const double j = p.real("J", fallback);
  if (j < 0.0) throw InvalidInput("coupling must be nonnegative (ferromagnetic model)");
  return j;
}

double probability_param(Params& p, const std::string& key, double fallback) {
  const double x = p.real(key, fallback);
  if (x < 0.0 || x > 1.0) throw InvalidInput("generator parameter '" + key + "' must lie in [0, 1]");
  return x;
}

}  // namespace

IsingModel generate_model(const GeneratorSpec& spec, RngStream& rng) {
  Params p(spec);
  std::vector<Edge> edges;
  int n = 0;
  const std::string& kind = spec.kind;
  if (kind == "empty") {
    n = p.count("n", 1);
  } else if (kind == "path") {
    n = p.count("n", 1);
    const double j = coupling_param(p);
    for (int v = 0; v + 1 < n; ++v) edges.push_back({v, v + 1, j});
  } else if (kind == "cycle") {
    n = p.count("n", 3);
    const double j = coupling_param(p);
    for (int v = 0; v < n; ++v) edges.push_back({v, (v + 1) % n, j});
  } else if (kind == "complete") {
    n = p.count("n", 1);
    double j = 0.0;
    if (p.has("beta")) {
      if (p.has("J")) throw InvalidInput("complete takes J or beta, not both");
      const double beta = p.real("beta");
      if (beta < 0.0) throw InvalidInput("beta must be nonnegative");
      j = beta / n;
    } else {
      j = coupling_param(p);
    }
    for (int u = 0; u < n; ++u)
      for (int v = u + 1; v < n; ++v) edges.push_back({u, v, j});
  } else if (kind == "grid2d") {
    const int rows = p.count("rows", 1);
    const int cols = p.count("cols", 1);
    const double j = coupling_param(p);
    n = rows * cols;
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) {
        const int v = r * cols + c;
        if (c + 1 < cols) edges.push_back({v, v + 1, j});
        if (r + 1 < rows) edges.push_back({v, v + cols, j});
      }
  } else if (kind == "erdos-renyi") {
    n = p.count("n", 1);
    const double prob = probability_param(p, "p", 0.5);
    const double j = coupling_param(p);
    for (int u = 0; u < n; ++u)
      for (int v = u + 1; v < n; ++v)
        if (rng.uniform() < prob) edges.push_back({u, v, j});
  } else if (kind == "random-j") {
    n = p.count("n", 1);
    const double prob = probability_param(p, "p", 1.0);
    const double lo = p.real("jmin", 0.0);
    const double hi = p.real("jmax", 1.0);
    if (lo < 0.0 || hi < lo) throw InvalidInput("random-j needs 0 <= jmin <= jmax");
    for (int u = 0; u < n; ++u)
      for (int v = u + 1; v < n; ++v)
        if (rng.uniform() < prob) {
          const double j = lo + (hi - lo) * rng.uniform();
          edges.push_back({u, v, j});
        }
  } else {
    throw InvalidInput("unknown generator kind '" + kind + "'");
  }
  const double h = p.real("h", 0.0);
  p.finish();
  return IsingModel(n, std::move(edges), std::vector<double>(static_cast<std::size_t>(n), h));
}

IsingModel load_model(const std::string& source, std::uint64_t seed) {
  if (source.rfind("gen:", 0) == 0) {
    RngStream rng(derive_seed(seed, "model"), 0);
    return generate_model(parse_generator(source), rng);
  }
  return parse_model(source);
}

}  // namespace mixlab
