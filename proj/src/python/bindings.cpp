// Python bindings.  Reports and traces cross the boundary as JSON text; the
// Python package decodes them.
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "json.hpp"
#include "specguard/repair.hpp"
#include "specguard/report.hpp"
#include "specguard/simulator.hpp"

namespace py = pybind11;
using namespace specguard;

namespace {

AnalysisOptions options(const std::string& mode, std::uint64_t sew,
                        const std::optional<std::vector<std::string>>& sources,
                        const std::optional<std::string>& geometry,
                        const std::vector<std::string>& extra_protected) {
  AnalysisOptions o;
  const auto m = parse_taint_mode(mode);
  if (!m) throw std::invalid_argument("unknown taint mode '" + mode + "'");
  o.taint.mode = *m;
  if (sources) o.taint.sources = *sources;
  o.window.sew = sew;
  if (geometry) o.geometry = CacheGeometry::parse(*geometry);
  o.extra_protected = extra_protected;
  return o;
}

std::string analyze_json(const std::string& text, const std::string& name, const std::string& mode,
                         std::uint64_t sew, const std::optional<std::vector<std::string>>& sources,
                         const std::optional<std::string>& geometry,
                         const std::vector<std::string>& extra_protected) {
  const AnalysisOptions o = options(mode, sew, sources, geometry, extra_protected);
  return emit_report(make_report(analyze(parse_program(text), o), name, o), ReportFormat::json);
}

std::string repair_text(const std::string& text, const std::string& mode, std::uint64_t sew) {
  const AnalysisOptions o = options(mode, sew, std::nullopt, std::nullopt, {});
  const Program p = parse_program(text);
  return print_program(apply_fences(p, plan_fences(analyze(p, o).detections)));
}

std::string simulate_json(const std::string& text, const std::string& input,
                          const std::string& mispredict, std::uint64_t sew,
                          const std::optional<std::string>& geometry, int max_depth) {
  const Program p = parse_program(text);
  SimOptions opts;
  opts.policy = MispredictPolicy::parse(mispredict);
  opts.sew = sew;
  opts.max_depth = max_depth;
  if (geometry) opts.geometry = CacheGeometry::parse(*geometry);
  const SpecTrace t = simulate(p, parse_sim_input(input), opts);
  nlohmann::ordered_json events = nlohmann::ordered_json::array();
  for (const auto& e : t.events) {
    nlohmann::ordered_json j;
    j["inst"] = e.inst;
    j["kind"] = std::string(to_string(e.kind));
    j["op"] = std::string(to_string(p.instruction(e.inst).opcode));
    j["depth"] = e.depth;
    if (e.access) {
      j["region"] = e.access->region;
      j["offset"] = e.access->offset;
      j["line"] = e.access->line;
      j["write"] = e.access->write;
    }
    if (e.value) j["value"] = *e.value;
    events.push_back(std::move(j));
  }
  return nlohmann::ordered_json{{"status", t.status == TraceStatus::halted ? "halted" : "faulted"},
                                {"events", std::move(events)}}
      .dump();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Speculative-execution leak detection over a small IR";
  m.attr("__version__") = std::string(kVersion);

  static py::exception<ParseError> parse_error(m, "ParseError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ParseError& e) {
      py::object err = py::handle(parse_error)(e.what());
      err.attr("line") = e.line();
      err.attr("column") = e.column();
      PyErr_SetObject(parse_error.ptr(), err.ptr());
    } catch (const StepBudgetExceeded& e) {
      PyErr_SetString(PyExc_RuntimeError, e.what());
    }
  });

  m.def("normalize", [](const std::string& text) { return print_program(parse_program(text)); },
        py::arg("text"), "Parse a program and print it in canonical form.");
  m.def("analyze_json", &analyze_json, py::arg("text"), py::arg("name") = "<string>",
        py::arg("mode") = "program_dep", py::arg("sew") = kDefaultSew, py::arg("sources") = py::none(),
        py::arg("geometry") = py::none(), py::arg("extra_protected") = std::vector<std::string>{},
        py::call_guard<py::gil_scoped_release>());
  m.def("repair", &repair_text, py::arg("text"), py::arg("mode") = "program_dep",
        py::arg("sew") = kDefaultSew, py::call_guard<py::gil_scoped_release>(),
        "Insert a fence before every detected access and return the patched program.");
  m.def("simulate_json", &simulate_json, py::arg("text"), py::arg("input") = "",
        py::arg("mispredict") = "none", py::arg("sew") = kDefaultSew, py::arg("geometry") = py::none(),
        py::arg("max_depth") = 1, py::call_guard<py::gil_scoped_release>());
}
