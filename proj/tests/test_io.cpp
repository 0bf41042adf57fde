#include <doctest.h>

#include <cstdio>
#include <cmath>
#include <fstream>
#include <sstream>

#include "mixlab/errors.hpp"
#include "mixlab/io.hpp"

using namespace mixlab;

TEST_CASE("parse the model format") {
  const auto m = parse_model_text("# comment\nn 2\ne 0 1 0.5\n");
  CHECK(m.size() == 2);
  REQUIRE(m.edges().size() == 1);
  CHECK(m.edges()[0].coupling == 0.5);
  CHECK_FALSE(m.has_field());

  const auto f = parse_model_text("n 2\ne 0 1 0.5\nh 0 0.3\n");
  CHECK(f.field_at(0) == 0.3);
  CHECK(f.field_at(1) == 0.0);
}

TEST_CASE("parse errors name the line") {
  auto message = [](const char* text) {
    try {
      parse_model_text(text);
    } catch (const InvalidInput& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  const auto neg = message("n 2\ne 0 1 -0.1\n");
  CHECK(neg.find("line 2") != std::string::npos);
  CHECK(neg.find("ferromagnetic") != std::string::npos);
  CHECK(message("n 2\nx 1\n").find("line 2") != std::string::npos);
  CHECK(message("n 2\ne 0 1\n").find("line 2") != std::string::npos);
  CHECK(message("e 0 1 0.5\n").find("line 1") != std::string::npos);
  CHECK(message("n 2\ne 0 1 0.5 7\n").find("line 2") != std::string::npos);
  CHECK(message("n 2\ne 0 1 abc\n").find("line 2") != std::string::npos);
  CHECK_FALSE(message("n 2\nn 3\n").empty());
  CHECK_FALSE(message("").empty());
  CHECK_THROWS_AS(parse_model("/nonexistent/model.txt"), InvalidInput);
}

TEST_CASE("generators") {
  RngStream rng(1, 0);
  CHECK(generate_model(parse_generator("empty:n=5"), rng).edges().empty());
  CHECK(generate_model(parse_generator("empty:n=5"), rng).size() == 5);
  const auto cycle = generate_model(parse_generator("gen:cycle:n=4,J=1"), rng);
  REQUIRE(cycle.edges().size() == 4);
  for (const auto& e : cycle.edges()) CHECK(e.coupling == 1.0);
  CHECK(generate_model(parse_generator("grid2d:rows=3,cols=3"), rng).edges().size() == 12);
  CHECK(generate_model(parse_generator("path:n=6,J=0.4"), rng).edges().size() == 5);
  const auto mf = generate_model(parse_generator("complete:n=5,beta=2"), rng);
  CHECK(mf.edges().size() == 10);
  CHECK(mf.edges()[0].coupling == doctest::Approx(0.4));
  const auto h = generate_model(parse_generator("path:n=3,J=0.4,h=0.2"), rng);
  CHECK(h.field_at(2) == 0.2);

  CHECK_THROWS_AS(generate_model(parse_generator("cycle:n=2"), rng), InvalidInput);
  CHECK_THROWS_AS(generate_model(parse_generator("path:n=3,J=-1"), rng), InvalidInput);
  CHECK_THROWS_AS(generate_model(parse_generator("path:n=3,bogus=1"), rng), InvalidInput);
  CHECK_THROWS_AS(generate_model(parse_generator("torus:n=3"), rng), InvalidInput);
  CHECK_THROWS_AS(parse_generator("path:n"), InvalidInput);
}

TEST_CASE("generated models are deterministic and nonnegative") {
  for (const char* src : {"gen:erdos-renyi:n=12,p=0.3,J=0.5", "gen:random-j:n=10,p=0.5,jmin=0,jmax=2"}) {
    const auto a = load_model(src, 7);
    const auto b = load_model(src, 7);
    CHECK(a == b);
    for (const auto& e : a.edges()) CHECK(e.coupling >= 0.0);
  }
  CHECK_FALSE(load_model("gen:erdos-renyi:n=12,p=0.5,J=0.5", 1) == load_model("gen:erdos-renyi:n=12,p=0.5,J=0.5", 2));
}

TEST_CASE("write then parse is the identity") {
  RngStream rng(3, 0);
  for (const char* spec : {"empty:n=3", "path:n=5,J=0.3", "cycle:n=6,J=1.25,h=0.1", "complete:n=6,beta=1.7",
                           "grid2d:rows=2,cols=4,J=0.9", "erdos-renyi:n=9,p=0.4,J=0.7",
                           "random-j:n=8,p=0.6,jmin=0.1,jmax=1.9"}) {
    const auto m = generate_model(parse_generator(spec), rng);
    CHECK(parse_model_text(write_model(m)) == m);
  }
  const auto path = std::string("/tmp/mixlab_io_test_model.txt");
  {
    std::ofstream out(path);
    out << write_model(IsingModel(3, {{0, 2, 0.1}}, {0.0, 0.5, 0.0}));
  }
  CHECK(parse_model(path) == IsingModel(3, {{0, 2, 0.1}}, {0.0, 0.5, 0.0}));
  std::remove(path.c_str());
}

TEST_CASE("suite on a single vertex") {
  ExperimentConfig c;
  c.model_source = "gen:empty:n=1";
  c.suite = {"gap_bound"};
  const auto out = run_suite(c);
  CHECK(out.exit_code == 0);
  REQUIRE(out.report["checks"].size() == 1);
  CHECK(out.report["checks"][0]["verdict"] == "pass");
  CHECK_FALSE(out.report.contains("timing"));
  // A TV curve of one site: 1/2 at t = 0, exact after one update.
  CHECK(emit_plot_data(out.report, "tv_curve") == "t,value,ci\n0,0.5,0\n1,0,0\n");
  CHECK(emit_plot_data(out.report, "gap_bound.tv_curve") == "t,value,ci\n0,0.5,0\n1,0,0\n");
  CHECK_THROWS_AS(emit_plot_data(out.report, "nope"), InvalidInput);
  CHECK_THROWS_AS(emit_plot_data(out.report, ""), InvalidInput);
}

TEST_CASE("suite input validation") {
  ExperimentConfig c;
  c.model_source = "gen:empty:n=2";
  c.suite = {"gap_bound", "no_such_check"};
  CHECK_THROWS_AS(run_suite(c), InvalidInput);
  c.suite = {"all"};
  c.replicas = 1;
  CHECK_THROWS_AS(run_suite(c), InvalidInput);
}

TEST_CASE("capacity surfaces per check") {
  ExperimentConfig c;
  c.model_source = "gen:path:n=14,J=0.2";
  c.suite = {"gap_bound", "censoring"};
  const auto out = run_suite(c);
  CHECK(out.exit_code == 0);
  for (const auto& r : out.report["checks"]) CHECK(r["verdict"] == "skipped");
}

TEST_CASE("full suite on small models passes and is reproducible") {
  for (const char* src : {"gen:path:n=3,J=0.5", "gen:cycle:n=4,J=0.3", "gen:empty:n=4"}) {
    ExperimentConfig c;
    c.model_source = src;
    c.suite = {"all"};
    c.replicas = 400;
    c.seed = 11;
    const auto a = run_suite(c);
    CHECK(a.exit_code == 0);
    CHECK(a.report["summary"]["fail"] == 0);
    c.workers = 3;
    const auto b = run_suite(c);
    CHECK(dump_report(a.report) == dump_report(b.report));
  }
}

TEST_CASE("mean series at zero coupling follows the closed form") {
  ExperimentConfig c;
  c.model_source = "gen:empty:n=6";
  c.suite = {"expectation_decay"};
  c.k = 6;
  c.replicas = 3000;
  const auto out = run_suite(c);
  const auto csv = emit_plot_data(out.report, "mean_s");
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  CHECK(line == "t,value,ci");
  int rows = 0;
  while (std::getline(in, line)) {
    double t = 0, v = 0, ci = 0;
    REQUIRE(std::sscanf(line.c_str(), "%lf,%lf,%lf", &t, &v, &ci) == 3);
    CHECK(std::abs(v - 6.0 * std::pow(5.0 / 6.0, t)) <= ci);
    ++rows;
  }
  CHECK(rows > 10);
}
