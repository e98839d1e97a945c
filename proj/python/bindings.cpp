#include "nhawkes/error.hpp"
#include "nhawkes/event_stream.hpp"
#include "nhawkes/first_order.hpp"
#include "nhawkes/metrics.hpp"
#include "nhawkes/presets.hpp"
#include "nhawkes/simulator.hpp"
#include "nhawkes/solver.hpp"
#include "nhawkes/stats.hpp"
#include "nhawkes/wiener_hopf.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <fstream>
#include <sstream>

namespace py = pybind11;
using namespace nhawkes;

namespace {

// JSON crosses the boundary as text; the Python side parses it.
std::string dump(const nlohmann::json& j) { return j.dump(); }

struct Model {
  SecondOrderStats stats;
  std::vector<RowModel> rows;

  NormMatrix norms() const { return fitted_norms(rows, stats, solver_quadrature(stats, rows.front().config.quadrature)); }
};

py::array_t<double> to_array(const std::vector<double>& v) { return py::array_t<double>(v.size(), v.data()); }

py::array_t<double> matrix(const NormMatrix& m) {
  py::array_t<double> out({m.dim, m.dim});
  auto a = out.mutable_unchecked<2>();
  for (std::size_t i = 0; i < m.dim; ++i)
    for (std::size_t j = 0; j < m.dim; ++j) a(i, j) = m(i, j);
  return out;
}

NormMatrix norm_matrix(const std::vector<std::vector<double>>& rows) {
  NormMatrix m(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows.size()) throw ArgumentError("norm matrix must be square");
    for (std::size_t j = 0; j < rows.size(); ++j) m(i, j) = rows[i][j];
  }
  return m;
}

py::array_t<double> sample(const KernelFunction& f, std::size_t i, std::size_t j, const std::vector<double>& t, int m) {
  std::vector<double> v(t.size());
  for (std::size_t k = 0; k < t.size(); ++k) v[k] = f(i, j, t[k], m);
  return to_array(v);
}

}  // namespace

PYBIND11_MODULE(_core, mod) {
  mod.doc() = "Marked Hawkes kernel estimation core";

  py::register_exception<ArgumentError>(mod, "ArgumentError", PyExc_ValueError);
  py::register_exception<NumericalError>(mod, "NumericalError", PyExc_ArithmeticError);

  py::class_<KernelSpec>(mod, "KernelSpec")
      .def_static("from_json", [](const std::string& s) { return kernel_spec_from_json(nlohmann::json::parse(s)); })
      .def("to_json", [](const KernelSpec& s) { return dump(to_json(s)); })
      .def_property_readonly("dimension", &KernelSpec::dimension)
      .def_property_readonly("marks", &KernelSpec::marks)
      .def_property_readonly("baseline", &KernelSpec::baseline)
      .def("__call__", [](const KernelSpec& s, std::size_t i, std::size_t j, const std::vector<double>& t, int m) {
        return sample(spec_function(s), i, j, t, m);
      }, py::arg("i"), py::arg("j"), py::arg("t"), py::arg("mark") = 1)
      .def("norms", [](const KernelSpec& s) { return matrix(kernel_l1_norm_exact(s, INFINITY)); })
      .def("branching_ratio", [](const KernelSpec& s) { return branching_ratio(kernel_l1_norm_exact(s, INFINITY)); });

  mod.def("preset_names", &preset_names);
  mod.def("preset", [](const std::string& name) { return preset(name).spec; });

  py::class_<EventStream>(mod, "EventStream")
      .def(py::init([](std::size_t dim, int marks, double horizon, const std::vector<double>& times,
                       const std::vector<std::uint32_t>& components, const std::vector<std::int32_t>& mk) {
             if (times.size() != components.size() || times.size() != mk.size())
               throw ArgumentError("times, components and marks must have equal length");
             std::vector<Event> ev(times.size());
             for (std::size_t k = 0; k < ev.size(); ++k) ev[k] = {times[k], components[k], mk[k]};
             return EventStream(dim, marks, horizon, std::move(ev));
           }),
           py::arg("dimension"), py::arg("marks"), py::arg("horizon"), py::arg("times"), py::arg("components"),
           py::arg("event_marks"))
      .def_property_readonly("dimension", &EventStream::dimension)
      .def_property_readonly("marks", &EventStream::marks)
      .def_property_readonly("horizon", &EventStream::horizon)
      .def("__len__", &EventStream::size)
      .def_property_readonly("times", [](const EventStream& s) {
        std::vector<double> v;
        for (const auto& e : s.events()) v.push_back(e.time);
        return to_array(v);
      })
      .def_property_readonly("components", [](const EventStream& s) {
        std::vector<std::uint32_t> v;
        for (const auto& e : s.events()) v.push_back(e.component);
        return v;
      })
      .def_property_readonly("event_marks", [](const EventStream& s) {
        std::vector<std::int32_t> v;
        for (const auto& e : s.events()) v.push_back(e.mark);
        return v;
      })
      .def("counts", &EventStream::counts)
      .def_static("read_csv", [](const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ArgumentError("cannot open '" + path + "'");
        return read_events_csv(in);
      })
      .def("write_csv", [](const EventStream& s, const std::string& path) {
        std::ofstream out(path);
        if (!out) throw ArgumentError("cannot write '" + path + "'");
        write_events_csv(out, s);
      });

  mod.def("simulate", [](const KernelSpec& spec, double horizon, std::uint64_t seed, std::size_t stop_after_events) {
    SimConfig c{spec, horizon, seed};
    c.stop_after_events = stop_after_events;
    py::gil_scoped_release release;
    return simulate(c);
  }, py::arg("spec"), py::arg("horizon"), py::arg("seed") = 0, py::arg("stop_after_events") = 0);

  py::class_<StatGrid>(mod, "StatGrid")
      .def_readonly("h", &StatGrid::h)
      .def_readonly("n_lin", &StatGrid::n_lin)
      .def_readonly("n_log", &StatGrid::n_log)
      .def_readonly("T", &StatGrid::T)
      .def_readonly("t_min", &StatGrid::t_min)
      .def_property_readonly("points", [](const StatGrid& g) { return to_array(g.points); })
      .def_property_readonly("centers", [](const StatGrid& g) {
        std::vector<double> c(g.bins());
        for (std::size_t b = 0; b < g.bins(); ++b) c[b] = g.center(b);
        return to_array(c);
      });
  mod.def("build_grid", &build_grid, py::arg("h"), py::arg("n_lin"), py::arg("n_log"), py::arg("T"));

  py::class_<SecondOrderStats>(mod, "SecondOrderStats")
      .def_readonly("dimension", &SecondOrderStats::dim)
      .def_readonly("marks", &SecondOrderStats::marks)
      .def_readonly("rates", &SecondOrderStats::rates)
      .def_readonly("pmf", &SecondOrderStats::pmf)
      .def_readonly("grid", &SecondOrderStats::grid)
      .def("g", [](const SecondOrderStats& s, std::size_t i, std::size_t j, int m) {
        if (i >= s.dim || j >= s.dim || m < 1 || m > s.marks) throw ArgumentError("index out of range");
        std::vector<double> v(s.grid.bins());
        for (std::size_t b = 0; b < v.size(); ++b) v[b] = s.g(i, j, m, b);
        return to_array(v);
      }, py::arg("i"), py::arg("j"), py::arg("mark") = 1)
      .def("save", [](const SecondOrderStats& s, const std::string& path) { save_stats(path, s, std::nullopt); })
      .def_static("load", &load_stats);

  mod.def("estimate_second_order", [](const EventStream& s, const StatGrid& g, int jobs) {
    py::gil_scoped_release release;
    return estimate_second_order(s, g, jobs);
  }, py::arg("stream"), py::arg("grid"), py::arg("jobs") = 1);

  mod.def("default_train_config", [] { return dump(to_json(TrainConfig{})); });

  py::class_<Model>(mod, "NeuralModel")
      .def("__call__", [](const Model& m, std::size_t i, std::size_t j, const std::vector<double>& t, int mark) {
        return sample(model_function(m.rows), i, j, t, mark);
      }, py::arg("i"), py::arg("j"), py::arg("t"), py::arg("mark") = 1)
      .def("norms", [](const Model& m) { return matrix(m.norms()); })
      .def("branching_ratio", [](const Model& m) { return branching_ratio(m.norms()); })
      .def("baseline", [](const Model& m) { return baseline_from_rates(m.norms(), m.stats.rates); })
      .def("loss_history", [](const Model& m) {
        std::vector<std::vector<double>> out;
        for (const auto& r : m.rows) out.push_back(r.loss_history);
        return out;
      })
      .def("tabulate", [](const Model& m, const std::vector<double>& nodes) { return tabulate(m.rows, m.stats, nodes); })
      .def("rows_json", [](const Model& m) {
        nlohmann::json j = nlohmann::json::array();
        for (const auto& r : m.rows) j.push_back(to_json(r));
        return dump(j);
      });

  mod.def("fit_neural", [](const SecondOrderStats& stats, const std::string& config, int jobs) {
    const TrainConfig c = train_config_from_json(nlohmann::json::parse(config));
    py::gil_scoped_release release;
    return Model{stats, fit(stats, c, jobs)};
  }, py::arg("stats"), py::arg("config") = "{}", py::arg("jobs") = 1);

  py::class_<WhSolution>(mod, "WienerHopfSolution")
      .def_readonly("rcond", &WhSolution::rcond)
      .def_readonly("times", &WhSolution::times)
      .def("__call__", [](const WhSolution& s, std::size_t i, std::size_t j, const std::vector<double>& t, int mark) {
        return sample(wh_function(s), i, j, t, mark);
      }, py::arg("i"), py::arg("j"), py::arg("t"), py::arg("mark") = 1);

  mod.def("fit_wiener_hopf", [](const SecondOrderStats& stats, std::size_t Q) {
    py::gil_scoped_release release;
    return wh_solve(stats, Q);
  }, py::arg("stats"), py::arg("quadrature") = 200);

  mod.def("error_report", [](const Model& m, const KernelSpec& truth, std::size_t K, double T) {
    return dump(to_json(error_report(model_function(m.rows), truth, K, T > 0 ? T : m.stats.grid.T, m.stats.grid.t_min)));
  }, py::arg("model"), py::arg("truth"), py::arg("K") = 1000, py::arg("T") = 0.0);
  mod.def("error_report", [](const WhSolution& s, const KernelSpec& truth, std::size_t K, double T) {
    return dump(to_json(error_report(wh_function(s), truth, K, T > 0 ? T : s.stats.grid.T, 0.0)));
  }, py::arg("model"), py::arg("truth"), py::arg("K") = 1000, py::arg("T") = 0.0);

  mod.def("causality_report", [](const std::vector<std::vector<double>>& norms, const std::vector<double>& rates,
                                 const std::vector<double>& volumes) {
    return dump(to_json(causality_report(norm_matrix(norms), rates, volumes)));
  }, py::arg("norms"), py::arg("rates"), py::arg("volumes"));
  mod.def("branching_ratio", [](const std::vector<std::vector<double>>& norms) {
    return branching_ratio(norm_matrix(norms));
  });
}
