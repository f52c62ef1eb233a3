// Python bindings. JSON crosses the boundary as text; the mchr package
// decodes it.

#include <sstream>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mchr/cli.hpp"
#include "mchr/error.hpp"
#include "mchr/metrics.hpp"
#include "mchr/session.hpp"
#include "mchr/simulate.hpp"
#include "mchr/taxonomy.hpp"

namespace py = pybind11;

namespace {

std::string report_runs(const std::vector<std::string>& dirs, bool allow_incomplete) {
  std::vector<std::unique_ptr<mchr::RunSession>> sessions;
  std::vector<const mchr::RunState*> states;
  for (const auto& d : dirs) {
    sessions.push_back(mchr::RunSession::open(d, false));
    states.push_back(&sessions.back()->state());
  }
  return mchr::report_to_json(mchr::build_report(states, allow_incomplete)).dump();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "MCHR annotation core";

  static py::exception<mchr::Error> error(m, "Error");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const mchr::Error& e) {
      py::set_error(error, (std::string(mchr::errc_name(e.code())) + ": " + e.what()).c_str());
    }
  });

  m.def("normalize_label", &mchr::normalize_label, py::arg("raw"));

  m.def("wilson_ci", &mchr::wilson_ci, py::arg("k"), py::arg("n"), py::arg("z") = 1.96,
        "Wilson score interval as (low, high), or None when n == 0.");

  m.def(
      "expected_outcome",
      [](const std::string& profiles, std::size_t labels, double threshold) {
        const auto e = mchr::expected_outcome_oracle(mchr::profiles_from_json(nlohmann::json::parse(profiles)),
                                                     labels, threshold);
        return py::dict(py::arg("hrr") = e.hrr, py::arg("auto_accuracy") = e.auto_accuracy,
                        py::arg("auto_share") = e.auto_share);
      },
      py::arg("profiles"), py::arg("labels"), py::arg("threshold"));

  m.def(
      "simulate",
      [](const std::string& profiles, const std::string& task, std::size_t n, std::uint64_t seed,
         double human_accuracy, unsigned workers) {
        mchr::SimulationConfig c;
        c.profiles = mchr::profiles_from_json(nlohmann::json::parse(profiles));
        c.task = mchr::task_from_json(nlohmann::json::parse(task));
        c.n = n;
        c.seed = seed;
        c.human_accuracy = human_accuracy;
        c.workers = workers;
        py::gil_scoped_release release;
        return mchr::report_to_json(mchr::simulate_run(c)).dump();
      },
      py::arg("profiles"), py::arg("task"), py::arg("n") = 1000, py::arg("seed") = 0,
      py::arg("human_accuracy") = 1.0, py::arg("workers") = 1);

  m.def("report", &report_runs, py::arg("runs"), py::arg("allow_incomplete") = false);

  m.def(
      "cli",
      [](std::vector<std::string> args) {
        args.insert(args.begin(), "mchr");
        std::vector<const char*> argv;
        for (const auto& a : args) argv.push_back(a.c_str());
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = mchr::cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs the mchr tool in-process; returns (exit code, stdout, stderr).");
}
