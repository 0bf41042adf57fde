#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <sstream>

#include "mixlab/errors.hpp"
#include "mixlab/io.hpp"

namespace {

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw mixlab::InvalidInput("cannot write '" + path + "'");
  out << text;
  if (!out) throw mixlab::InvalidInput("failed writing '" + path + "'");
}

void add_run_options(CLI::App* cmd, mixlab::ExperimentConfig& c, std::optional<int>& k) {
  cmd->add_option("--model", c.model_source, "model file or gen:kind:key=val,...")->required();
  cmd->add_option("--seed", c.seed, "root seed")->required();
  cmd->add_option("--out", c.out_path, "report path ('-' for stdout)")->required();
  cmd->add_option("--replicas", c.replicas, "Monte-Carlo replicas")->check(CLI::Range(2, 100000000));
  cmd->add_option("--k", k, "subset size |F|")->check(CLI::PositiveNumber);
  cmd->add_option("--tv-threshold", c.tv_threshold, "mixing threshold")->check(CLI::Range(1e-9, 1.0 - 1e-9));
  cmd->add_option("--enum-limit", c.enum_limit, "largest n enumerated exactly")->check(CLI::Range(1, 20));
  cmd->add_option("--horizon", c.horizon, "coupled-chain horizon (0 = automatic)")->check(CLI::NonNegativeNumber);
  cmd->add_option("--confidence", c.confidence, "Monte-Carlo confidence")->check(CLI::Range(1e-9, 1.0 - 1e-9));
  cmd->add_option("--c1", c.c1, "constant in T0 = k ln k / 2 - c1 k");
  cmd->add_option("--c2", c.c2, "constant in T = (n/k)(k ln k / 2 - c2 k)");
  cmd->add_option("--workers", c.workers, "worker threads (output does not depend on it)")->check(CLI::Range(1, 1024));
  cmd->add_flag("--timing", c.timing, "add wall-clock timings to the report");
}

int run(const mixlab::ExperimentConfig& config) {
  const auto outcome = mixlab::run_suite(config);
  write_output(config.out_path, mixlab::dump_report(outcome.report));
  const auto& s = outcome.report.at("summary");
  std::cerr << "pass " << s.at("pass") << ", fail " << s.at("fail") << ", indeterminate " << s.at("indeterminate")
            << ", skipped " << s.at("skipped") << "\n";
  return outcome.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Glauber dynamics mixing-time lower bounds: exact checks, simulation and certificates"};
  app.require_subcommand(1);

  mixlab::ExperimentConfig check_cfg;
  std::optional<int> check_k;
  std::string suite = "all";
  auto* check = app.add_subcommand("check", "run inequality checkers on a model");
  add_run_options(check, check_cfg, check_k);
  check->add_option("--suite", suite, "comma-separated checker ids or 'all'");

  mixlab::ExperimentConfig pipe_cfg;
  std::optional<int> pipe_k;
  auto* pipeline = app.add_subcommand("pipeline", "run the end-to-end lower-bound pipeline");
  add_run_options(pipeline, pipe_cfg, pipe_k);

  std::string report_path, series, plot_out;
  auto* plot = app.add_subcommand("plot", "extract a series from a report as CSV");
  plot->add_option("--report", report_path, "report path")->required();
  plot->add_option("--series", series, "series id (check.series or series)")->required();
  plot->add_option("--out", plot_out, "CSV path ('-' for stdout)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*check) {
      check_cfg.k = check_k;
      std::stringstream ss(suite);
      std::string id;
      while (std::getline(ss, id, ','))
        if (!id.empty()) check_cfg.suite.push_back(id);
      return run(check_cfg);
    }
    if (*pipeline) {
      pipe_cfg.k = pipe_k;
      pipe_cfg.suite = {"pipeline"};
      return run(pipe_cfg);
    }
    std::ifstream in(report_path, std::ios::binary);
    if (!in) throw mixlab::InvalidInput("cannot open report '" + report_path + "'");
    mixlab::Json report;
    try {
      report = mixlab::Json::parse(in);
    } catch (const mixlab::Json::exception& e) {
      throw mixlab::InvalidInput(std::string("report is not valid JSON: ") + e.what());
    }
    write_output(plot_out, mixlab::emit_plot_data(report, series));
    return 0;
  } catch (const mixlab::InvalidInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
