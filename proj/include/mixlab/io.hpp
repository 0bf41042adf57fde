#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mixlab/checks.hpp"
#include "mixlab/ising.hpp"
#include "mixlab/pipeline.hpp"

namespace mixlab {

/// Line-based model format, '#' starts a comment:
///   n <count>
///   e <u> <v> <J>     (J >= 0)
///   h <v> <H>         (optional, default 0)
/// Errors name the offending line.
IsingModel parse_model_text(std::string_view text);
IsingModel parse_model(const std::string& path);

/// Inverse of parse_model_text; doubles are written with 17 significant digits.
std::string write_model(const IsingModel& model);

struct GeneratorSpec {
  std::string kind;
  std::map<std::string, double> params;
};

/// "gen:kind:key=val,key=val" (the "gen:" prefix is optional here).
GeneratorSpec parse_generator(std::string_view spec);

/// Kinds: empty(n), path(n, J), cycle(n >= 3, J), complete(n, J or beta with
/// J = beta/n), grid2d(rows, cols, J), erdos-renyi(n, p, J),
/// random-j(n, p, jmin, jmax). Every kind takes an optional uniform field h.
IsingModel generate_model(const GeneratorSpec& spec, RngStream& rng);

/// A "gen:" source is generated from derive_seed(seed, "model"); anything
/// else is read as a file path.
IsingModel load_model(const std::string& source, std::uint64_t seed);

/// Every checker id, in report order.
const std::vector<std::string>& checker_ids();

struct ExperimentConfig {
  std::string model_source;
  std::vector<std::string> suite;  // checker ids or {"all"}
  std::uint64_t seed = 0;
  std::string out_path;
  std::optional<int> k;
  std::int64_t horizon = 0;  // coupled checks; 0 = automatic
  int replicas = 2000;
  double tv_threshold = 0.25;
  int enum_limit = kDefaultEnumLimit;
  double confidence = 0.99;
  double c1 = 1.0;
  double c2 = 2.0;
  // Not echoed: neither changes any output byte except the timing block.
  int workers = 1;
  bool timing = false;
};

Json config_to_json(const ExperimentConfig& config);

struct SuiteOutcome {
  Json report;
  int exit_code = 0;  // 0 no failure, 1 some failure
};

SuiteOutcome run_suite(const ExperimentConfig& config);
SuiteOutcome run_suite(const ExperimentConfig& config, const IsingModel& model);

/// Serialized report text (two-space indentation, trailing newline).
std::string dump_report(const Json& report);

/// CSV with header t,value,ci for a series named "check.series", or just
/// "series" when that name is unique in the report.
std::string emit_plot_data(const Json& report, const std::string& series_id);

}  // namespace mixlab
