#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mixlab/checks.hpp"
#include "mixlab/dynamics.hpp"
#include "mixlab/errors.hpp"
#include "mixlab/exact.hpp"
#include "mixlab/io.hpp"
#include "mixlab/pipeline.hpp"

namespace py = pybind11;
using namespace mixlab;

namespace {

// Reports cross the boundary as JSON text; the python side decodes them.
std::string report_text(const Json& j) { return j.dump(); }

SpinConfig to_config(const std::vector<int>& spins) {
  std::vector<std::int8_t> s;
  s.reserve(spins.size());
  for (int x : spins) {
    if (x != 1 && x != -1) throw InvalidInput("spins must be +1 or -1");
    s.push_back(static_cast<std::int8_t>(x));
  }
  return SpinConfig(std::move(s));
}

SpinConfig start_config(const IsingModel& model, const std::string& start) {
  if (start == "plus") return SpinConfig::all_plus(model.size());
  if (start == "minus") return SpinConfig::all_minus(model.size());
  throw InvalidInput("start must be 'plus' or 'minus'");
}

std::vector<std::vector<double>> to_rows(const Matrix& m) {
  std::vector<std::vector<double>> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out[i].push_back(m(i, j));
  return out;
}

Matrix from_rows(const std::vector<std::vector<double>>& rows) {
  const auto n = static_cast<Eigen::Index>(rows.size());
  Matrix m(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (static_cast<Eigen::Index>(rows[i].size()) != n) throw DimensionMismatch("matrix must be square");
    for (Eigen::Index j = 0; j < n; ++j) m(i, j) = rows[i][j];
  }
  return m;
}

}  // namespace

PYBIND11_MODULE(_mixlab, m) {
  m.doc() = "Glauber dynamics on ferromagnetic Ising models: exact engine, simulation and checkers";

  py::register_exception<CapacityError>(m, "CapacityError", PyExc_RuntimeError);

  py::class_<IsingModel>(m, "IsingModel")
      .def(py::init([](int n, const std::vector<std::tuple<int, int, double>>& edges, std::vector<double> field) {
             std::vector<Edge> es;
             for (const auto& [u, v, j] : edges) es.push_back({u, v, j});
             return IsingModel(n, std::move(es), std::move(field));
           }),
           py::arg("n"), py::arg("edges") = std::vector<std::tuple<int, int, double>>{},
           py::arg("field") = std::vector<double>{})
      .def_property_readonly("n", &IsingModel::size)
      .def_property_readonly("edges",
                             [](const IsingModel& model) {
                               std::vector<std::tuple<int, int, double>> out;
                               for (const auto& e : model.edges()) out.emplace_back(e.u, e.v, e.coupling);
                               return out;
                             })
      .def_property_readonly("field", &IsingModel::field)
      .def("__eq__", [](const IsingModel& a, const IsingModel& b) { return a == b; })
      .def("__repr__", [](const IsingModel& model) { return "<IsingModel " + describe(model) + ">"; });

  m.def("unnormalized_weight",
        [](const IsingModel& model, const std::vector<int>& s) { return unnormalized_weight(model, to_config(s)); });
  m.def("local_field",
        [](const IsingModel& model, const std::vector<int>& s, int v) { return local_field(model, to_config(s), v); });
  m.def("heat_bath_probability", [](const IsingModel& model, const std::vector<int>& s, int v) {
    return heat_bath_probability(model, to_config(s), v);
  });

  m.def(
      "gibbs_distribution",
      [](const IsingModel& model, int limit) {
        const auto t = gibbs_distribution(model, limit);
        return py::make_tuple(t.probs(), *t.log_partition());
      },
      py::arg("model"), py::arg("limit") = kDefaultEnumLimit,
      "(probabilities in canonical index order, log Z)");
  m.def(
      "moments",
      [](const IsingModel& model, int limit) {
        const auto mo = moments(gibbs_distribution(model, limit));
        return py::make_tuple(mo.magnetization, to_rows(mo.covariance));
      },
      py::arg("model"), py::arg("limit") = kDefaultEnumLimit);
  m.def(
      "spectral_gap",
      [](const IsingModel& model, int limit) { return spectral_data(glauber_transition_matrix(model, limit)).gap; },
      py::arg("model"), py::arg("limit") = kDefaultEnumLimit);
  m.def(
      "mixing_time",
      [](const IsingModel& model, const std::string& start, double threshold, int limit) {
        MixingOptions o;
        o.threshold = threshold;
        o.limit = limit;
        return exact_mixing_time(model, start_config(model, start), o);
      },
      py::arg("model"), py::arg("start") = "plus", py::arg("threshold") = 0.25, py::arg("limit") = kDefaultEnumLimit);
  m.def(
      "tv_curve",
      [](const IsingModel& model, const std::string& start, std::int64_t horizon, int limit) {
        return exact_tv_curve(model, start_config(model, start), horizon, limit);
      },
      py::arg("model"), py::arg("start") = "plus", py::arg("horizon") = 10, py::arg("limit") = kDefaultEnumLimit);

  m.def(
      "run_chain",
      [](const IsingModel& model, std::vector<int> subset, const std::string& variant, std::int64_t steps,
         std::uint64_t seed, std::uint64_t stream, const std::string& start) {
        ChainSpec spec = variant == "plain"         ? ChainSpec::plain(model)
                         : variant == "accelerated" ? ChainSpec::accelerated(model, std::move(subset))
                         : variant == "z_chain"     ? ChainSpec::z_chain(model, std::move(subset))
                                                    : throw InvalidInput("variant must be plain, accelerated or z_chain");
        RngStream rng(seed, stream);
        return run_chain(spec, start_config(model, start), steps, rng).sums;
      },
      py::arg("model"), py::arg("subset") = std::vector<int>{}, py::arg("variant") = "plain", py::arg("steps") = 100,
      py::arg("seed") = 0, py::arg("stream") = 0, py::arg("start") = "plus",
      "Sum of spins over F at t = 0..steps.");

  m.def(
      "select_low_cov_subset",
      [](const std::vector<std::vector<double>>& cov, int k, std::uint64_t seed) {
        RngStream rng(seed, 0);
        const auto sel = select_low_cov_subset(from_rows(cov), k, rng);
        return py::make_tuple(sel.subset, sel.pair_sum, sel.bound);
      },
      py::arg("cov"), py::arg("k"), py::arg("seed") = 0);

  m.def("parse_model_text", &parse_model_text);
  m.def("write_model", &write_model);
  m.def(
      "load_model", [](const std::string& source, std::uint64_t seed) { return load_model(source, seed); },
      py::arg("source"), py::arg("seed") = 0);
  m.def("checker_ids", &checker_ids);

  m.def(
      "_run_suite",
      [](const IsingModel& model, std::vector<std::string> suite, std::uint64_t seed, std::optional<int> k,
         int replicas, std::int64_t horizon, double tv_threshold, int enum_limit, double confidence, int workers,
         const std::string& source) {
        ExperimentConfig c;
        c.model_source = source;
        c.suite = std::move(suite);
        c.seed = seed;
        c.k = k;
        c.replicas = replicas;
        c.horizon = horizon;
        c.tv_threshold = tv_threshold;
        c.enum_limit = enum_limit;
        c.confidence = confidence;
        c.workers = workers;
        SuiteOutcome out;
        {
          py::gil_scoped_release release;
          out = run_suite(c, model);
        }
        return py::make_tuple(report_text(out.report), out.exit_code);
      },
      py::arg("model"), py::arg("suite"), py::arg("seed"), py::arg("k"), py::arg("replicas"), py::arg("horizon"),
      py::arg("tv_threshold"), py::arg("enum_limit"), py::arg("confidence"), py::arg("workers"), py::arg("source"));

  m.def(
      "_pipeline",
      [](const IsingModel& model, std::uint64_t seed, std::optional<int> k, int replicas, int limit, int workers) {
        PipelineParams p;
        p.seed = seed;
        p.k = k;
        p.replicas = replicas;
        p.limit = limit;
        p.workers = workers;
        py::gil_scoped_release release;
        return report_text(to_json(lower_bound_pipeline(model, p)));
      },
      py::arg("model"), py::arg("seed"), py::arg("k"), py::arg("replicas"), py::arg("limit"), py::arg("workers"));

  m.def("_emit_plot_data",
        [](const std::string& report, const std::string& series) { return emit_plot_data(Json::parse(report), series); });
}
