#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <functional>

#include "mixlab/errors.hpp"
#include "mixlab/io.hpp"

namespace mixlab {

namespace {

constexpr const char* kVersion = "mixlab 0.1.0";

const std::vector<std::string> kCheckers = {"gap_bound",   "variance_bound",   "low_cov_subset",    "ghs_concavity",
                                            "subadditivity", "censoring",      "contraction",       "variance_uniform",
                                            "expectation_decay", "pipeline"};

bool is_coupled(const std::string& id) {
  return id == "contraction" || id == "variance_uniform" || id == "expectation_decay";
}

CheckReport skipped(const std::string& id, const IsingModel& model, const std::string& reason) {
  CheckReport r;
  r.id = id;
  r.statement = "";
  r.instance = describe(model);
  r.verdict = Verdict::skipped;
  r.margin = std::numeric_limits<double>::quiet_NaN();
  r.details["reason"] = reason;
  return r;
}

Json model_to_json(const IsingModel& model) {
  Json edges = Json::array();
  for (const auto& e : model.edges()) edges.push_back({e.u, e.v, e.coupling});
  return {{"n", model.size()}, {"edges", std::move(edges)}, {"field", model.field()}};
}

std::vector<std::string> resolve_suite(const std::vector<std::string>& requested) {
  std::vector<std::string> out;
  for (const auto& id : requested) {
    if (id == "all") return kCheckers;
    if (std::find(kCheckers.begin(), kCheckers.end(), id) == kCheckers.end())
      throw InvalidInput("unknown checker id '" + id + "'");
  }
  for (const auto& id : kCheckers)
    if (std::find(requested.begin(), requested.end(), id) != requested.end()) out.push_back(id);
  if (out.empty()) throw InvalidInput("no checkers selected");
  return out;
}

int suite_subset_size(const ExperimentConfig& c, int n) {
  if (c.k) {
    if (*c.k < 1 || *c.k > n) throw InvalidInput("k must lie in [1, n]");
    return *c.k;
  }
  const int k = default_subset_size(n);
  return k >= 2 ? k : n;
}

}  // namespace

const std::vector<std::string>& checker_ids() { return kCheckers; }

Json config_to_json(const ExperimentConfig& c) {
  Json j;
  j["model"] = c.model_source;
  j["suite"] = c.suite;
  j["seed"] = c.seed;
  j["k"] = c.k ? Json(*c.k) : Json(nullptr);
  j["horizon"] = c.horizon;
  j["replicas"] = c.replicas;
  j["tv_threshold"] = c.tv_threshold;
  j["enum_limit"] = c.enum_limit;
  j["confidence"] = c.confidence;
  j["c1"] = c.c1;
  j["c2"] = c.c2;
  return j;
}

SuiteOutcome run_suite(const ExperimentConfig& config) {
  return run_suite(config, load_model(config.model_source, config.seed));
}

SuiteOutcome run_suite(const ExperimentConfig& config, const IsingModel& model) {
  if (config.enum_limit < 1 || config.enum_limit > kEnumHardCap)
    throw InvalidInput("enumeration limit must lie in [1, " + std::to_string(kEnumHardCap) + "]");
  if (config.replicas < 2) throw InvalidInput("need at least two replicas");
  const auto ids = resolve_suite(config.suite);
  const int n = model.size();
  const int limit = config.enum_limit;

  Json checks = Json::array();
  Json timing = Json::object();
  std::optional<Json> pipeline_json;
  Json summary = {{"pass", 0}, {"fail", 0}, {"indeterminate", 0}, {"skipped", 0}};

  // Shared lazily: covariance input and the subset built from it.
  std::optional<CovarianceInput> cov;
  std::optional<SubsetSelection> selection;
  auto subset = [&]() -> const SubsetSelection& {
    if (!selection) {
      if (!cov) cov = covariance_for(model, limit, 2000, derive_seed(config.seed, "covariance"));
      RngStream rng(derive_seed(config.seed, "low_cov_subset"), 0);
      selection = select_low_cov_subset(cov->covariance, suite_subset_size(config, n), rng);
    }
    return *selection;
  };

  std::vector<std::string> coupled_ids;
  for (const auto& id : ids)
    if (is_coupled(id)) coupled_ids.push_back(id);
  std::vector<CheckReport> coupled_reports;
  bool coupled_done = false;

  for (const auto& id : ids) {
    const auto start = std::chrono::steady_clock::now();
    const std::uint64_t seed = derive_seed(config.seed, id);
    CheckReport r;
    try {
      if (id == "gap_bound") {
        MixingOptions mo;
        mo.threshold = config.tv_threshold;
        mo.limit = limit;
        r = check_gap_bound(model, mo);
      } else if (id == "variance_bound") {
        r = check_variance_bound(model, limit);
      } else if (id == "low_cov_subset") {
        r = subset().report;
        r.instance = describe(model) + ", k=" + std::to_string(subset().subset.size());
        r.details["covariance_exact"] = cov->exact;
        r.details["covariance_clamped"] = cov->clamped;
        if (!cov->exact) r.certificate.kind = "estimate";
      } else if (id == "ghs_concavity") {
        if (n > limit) throw CapacityError("ghs_concavity enumerates 2^n states");
        RngStream rng(seed, 0);
        const auto grid = default_field_grid(n, rng);
        GhsOptions go;
        go.limit = limit;
        r = check_ghs_concavity(model, grid, go);
      } else if (id == "subadditivity") {
        RngStream rng(seed, 0);
        r = check_subadditivity_all(model, rng, 3, 2000, limit);
      } else if (id == "censoring") {
        if (n > 5) throw CapacityError("censoring enumerates increasing events and needs n <= 5");
        r = check_censoring_exhaustive(model, n <= 3 ? 4 : 3);
      } else if (is_coupled(id)) {
        if (!coupled_done) {
          coupled_done = true;
          const auto& sel = subset();
          CoupledOptions co;
          co.horizon = config.horizon;
          co.replicas = config.replicas;
          co.confidence = config.confidence;
          co.workers = config.workers;
          co.seed = derive_seed(config.seed, "coupled");
          coupled_reports = check_coupled_suite(model, sel.subset, cov->covariance, co, coupled_ids, limit);
          for (auto& cr : coupled_reports) {
            cr.details["covariance_exact"] = cov->exact;
          }
        }
        const auto pos = std::find(coupled_ids.begin(), coupled_ids.end(), id) - coupled_ids.begin();
        r = coupled_reports[static_cast<std::size_t>(pos)];
      } else if (id == "pipeline") {
        PipelineParams pp;
        pp.k = config.k;
        pp.limit = limit;
        pp.tv_threshold = config.tv_threshold;
        pp.confidence = config.confidence;
        pp.replicas = config.replicas;
        pp.c1 = config.c1;
        pp.c2 = config.c2;
        pp.workers = config.workers;
        pp.seed = seed;
        r = check_pipeline(model, pp);
        pipeline_json = r.details;
      }
      if (r.seed == 0) r.seed = seed;
    } catch (const CapacityError& e) {
      r = skipped(id, model, e.what());
      r.seed = seed;
    } catch (const InvalidInput& e) {
      r = skipped(id, model, e.what());
      r.seed = seed;
    }
    const auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    timing[id] = elapsed;
    summary[to_string(r.verdict)] = summary[to_string(r.verdict)].get<int>() + 1;
    checks.push_back(to_json(r));
  }

  Json report;
  report["version"] = kVersion;
  report["config"] = config_to_json(config);
  report["model"] = model_to_json(model);
  report["model"]["description"] = describe(model);
  report["checks"] = std::move(checks);
  if (pipeline_json) report["pipeline"] = *pipeline_json;
  report["summary"] = summary;
  if (config.timing) report["timing"] = timing;
  SuiteOutcome out;
  out.exit_code = summary["fail"].get<int>() > 0 ? 1 : 0;
  out.report = std::move(report);
  return out;
}

std::string dump_report(const Json& report) { return report.dump(2) + "\n"; }

namespace {

std::string number(double x) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, x);
  if (ec != std::errc()) return "nan";
  return std::string(buf, p);
}

}  // namespace

std::string emit_plot_data(const Json& report, const std::string& series_id) {
  if (series_id.empty()) throw InvalidInput("series id is empty");
  if (!report.contains("checks")) throw InvalidInput("report has no checks");
  const Json* found = nullptr;
  int matches = 0;
  const auto dot = series_id.find('.');
  for (const auto& c : report.at("checks")) {
    const auto& series = c.at("series");
    if (dot != std::string::npos) {
      if (c.at("id").get<std::string>() == series_id.substr(0, dot) && series.contains(series_id.substr(dot + 1))) {
        found = &series.at(series_id.substr(dot + 1));
        ++matches;
      }
    } else if (series.contains(series_id)) {
      found = &series.at(series_id);
      ++matches;
    }
  }
  if (matches == 0) throw InvalidInput("unknown series '" + series_id + "'");
  if (matches > 1) throw InvalidInput("series '" + series_id + "' is ambiguous; qualify it as check.series");
  if (found->empty()) throw InvalidInput("series '" + series_id + "' is empty");
  std::string out = "t,value,ci\n";
  for (const auto& row : *found) {
    out += number(row.at(0).get<double>()) + "," + number(row.at(1).get<double>()) + "," +
           number(row.at(2).get<double>()) + "\n";
  }
  return out;
}

}  // namespace mixlab
