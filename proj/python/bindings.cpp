#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "zakotfs/eval.hpp"
#include "zakotfs/modem.hpp"
#include "zakotfs/sweep.hpp"

namespace py = pybind11;
using namespace zakotfs;

namespace {

RunConfig config_from(const py::dict& settings) {
  RunConfig cfg;
  cfg.workers = 1;
  for (const auto& [k, v] : settings) apply_setting(cfg, py::str(k), py::str(v));
  cfg.validate();
  return cfg;
}

py::dict row_dict(const ResultRow& r) {
  py::dict d;
  d["mode"] = to_string(r.mode);
  d["snr_db"] = r.snr_db;
  d["trial"] = r.trial;
  d["seed"] = r.seed;
  d["targets"] = r.targets;
  d["detections"] = r.detections;
  d["misses"] = r.misses;
  d["false_alarms"] = r.false_alarms;
  d["range_sq_err"] = r.range_sq_err;
  d["velocity_sq_err"] = r.velocity_sq_err;
  d["channel_rel_err"] = r.channel_rel_err;
  d["bit_errors"] = r.bit_errors;
  d["bit_count"] = r.bit_count;
  d["iterations"] = r.iterations;
  d["converged"] = r.converged;
  d["anm_violations"] = r.anm_violations;
  d["status"] = r.status;
  d["wall_time"] = r.wall_time;
  return d;
}

}  // namespace

PYBIND11_MODULE(_zakotfs, m) {
  m.doc() = "Zak-OTFS modem, bistatic channel and semi-blind ISAC receiver";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  py::class_<GridConfig>(m, "GridConfig")
      .def(py::init<>())
      .def_readwrite("M", &GridConfig::M)
      .def_readwrite("N", &GridConfig::N)
      .def_readwrite("delta_f", &GridConfig::delta_f)
      .def_readwrite("f_c", &GridConfig::f_c)
      .def_property_readonly("MN", &GridConfig::MN)
      .def_property_readonly("delay_resolution", &GridConfig::delay_resolution)
      .def_property_readonly("doppler_resolution", &GridConfig::doppler_resolution)
      .def("__repr__", [](const GridConfig& g) {
        return "GridConfig(M=" + std::to_string(g.M) + ", N=" + std::to_string(g.N) + ")";
      });
  m.def("default_grid", &default_grid);

  py::class_<Path>(m, "Path")
      .def(py::init([](Complex gain, double tau, double nu) { return Path{gain, tau, nu}; }), py::arg("gain"),
           py::arg("tau"), py::arg("nu"))
      .def_readwrite("gain", &Path::gain)
      .def_readwrite("tau", &Path::tau)
      .def_readwrite("nu", &Path::nu)
      .def("__repr__", [](const Path& p) {
        return "Path(tau=" + std::to_string(p.tau) + ", nu=" + std::to_string(p.nu) + ")";
      });

  py::class_<ZakModem>(m, "ZakModem")
      .def(py::init<const GridConfig&>())
      .def_property_readonly("grid", &ZakModem::grid)
      .def("modulate", &ZakModem::modulate, py::arg("x_dd"))
      .def("demodulate", &ZakModem::demodulate, py::arg("r"))
      .def("apply_time_channel", &ZakModem::apply_time_channel, py::arg("s"), py::arg("paths"))
      .def("effective_channel", [](const ZakModem& mo, const PathSet& p) { return mo.effective_channel(p).H; },
           py::arg("paths"));

  m.def("hungarian", &hungarian, py::arg("cost"), "minimum-cost assignment as (row, col) pairs");
  m.def(
      "match_targets",
      [](const PathSet& truth, const PathSet& est, const GridConfig& g) {
        const MatchResult r = match_targets(truth, est, g);
        return py::dict(py::arg("pairs") = r.pairs, py::arg("misses") = r.misses,
                        py::arg("false_alarms") = r.false_alarms);
      },
      py::arg("truth"), py::arg("estimates"), py::arg("grid"));

  m.def("config_keys", &config_keys);
  m.def(
      "default_config",
      [] {
        py::dict d;
        for (const auto& [k, v] : config_entries(RunConfig{})) d[py::str(k)] = v;
        return d;
      },
      "every setting with its default, as strings");
  m.def(
      "run_sweep",
      [](const py::dict& settings) {
        const RunConfig cfg = config_from(settings);
        std::vector<ResultRow> rows;
        {
          py::gil_scoped_release release;
          rows = run_sweep(cfg);
        }
        py::list out;
        for (const auto& r : rows) out.append(row_dict(r));
        return out;
      },
      py::arg("settings") = py::dict(), "run a Monte-Carlo sweep; settings use the config-file keys");
  m.def(
      "selftest",
      [] {
        py::list out;
        for (const auto& item : selftest())
          out.append(py::make_tuple(item.name, item.passed, item.detail));
        return out;
      },
      "oracle checks on a 4x8 grid as (name, passed, detail) tuples");
}
