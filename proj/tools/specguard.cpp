// specguard: analyze, repair, simulate, and scan IR programs.
// Exit codes: 0 clean, 1 findings present, 2 usage or input error.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "specguard/analysis.hpp"
#include "specguard/repair.hpp"
#include "specguard/report.hpp"
#include "specguard/simulator.hpp"

namespace fs = std::filesystem;
using namespace specguard;

namespace {

constexpr int kClean = 0;
constexpr int kFindings = 1;
constexpr int kUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text)) throw UsageError("cannot write '" + path + "'");
}

Program load_program(const std::string& path) {
  try {
    return parse_program(read_file(path));
  } catch (const ParseError& e) {
    throw UsageError(path + ":" + e.what());
  }
}

struct CommonFlags {
  std::string mode;
  std::uint64_t sew = kDefaultSew;
  std::string sources;
  std::string geometry;
  std::vector<std::string> protected_regions;
  std::string format = "json";
  std::string out;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--mode", f.mode, "taint mode: program_dep or data_only");
  cmd->add_option("--sew", f.sew, "speculative execution window in instructions")->check(CLI::PositiveNumber);
  cmd->add_option("--sources", f.sources, "taint configuration file");
  cmd->add_option("--cache-geometry", f.geometry, "SETS:WAYS:LINESIZE");
  cmd->add_option("--protected", f.protected_regions, "additional protected region");
  cmd->add_option("--format", f.format, "report format")->check(CLI::IsMember({"json", "text"}));
  cmd->add_option("--out", f.out, "write the report here instead of stdout");
}

AnalysisOptions options_from(const CommonFlags& f) {
  AnalysisOptions o;
  if (!f.sources.empty()) {
    try {
      o.taint = parse_taint_config(read_file(f.sources));
    } catch (const std::runtime_error& e) {
      throw UsageError(f.sources + ": " + e.what());
    }
  }
  if (!f.mode.empty()) {
    auto m = parse_taint_mode(f.mode);
    if (!m) throw UsageError("unknown mode '" + f.mode + "'");
    o.taint.mode = *m;
  }
  o.window.sew = f.sew;
  if (!f.geometry.empty()) {
    try {
      o.geometry = CacheGeometry::parse(f.geometry);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }
  o.extra_protected = f.protected_regions;
  return o;
}

/// Runs `job` over every file on a bounded pool; results keep input order.
template <class Job>
auto run_parallel(const std::vector<std::string>& files, Job job) {
  using Result = decltype(job(files.front()));
  std::vector<std::future<Result>> pending;
  std::vector<Result> results;
  const std::size_t width = std::max(1u, std::thread::hardware_concurrency());
  for (std::size_t k = 0; k < files.size(); ++k) {
    pending.push_back(std::async(std::launch::async, job, files[k]));
    if (pending.size() - results.size() >= width) results.push_back(pending[results.size()].get());
  }
  while (results.size() < pending.size()) results.push_back(pending[results.size()].get());
  return results;
}

void emit(const std::vector<Report>& reports, const CommonFlags& f) {
  const ReportFormat format = f.format == "text" ? ReportFormat::text : ReportFormat::json;
  std::string text;
  if (format == ReportFormat::json && reports.size() > 1) {
    text = "[\n";
    for (std::size_t k = 0; k < reports.size(); ++k) {
      std::string one = emit_report(reports[k], format);
      one.pop_back();  // trailing newline
      text += one + (k + 1 < reports.size() ? ",\n" : "\n");
    }
    text += "]\n";
  } else {
    for (const auto& r : reports) text += emit_report(r, format);
  }
  if (f.out.empty()) std::cout << text;
  else write_file(f.out, text);
}

int exit_for(const std::vector<Report>& reports) {
  return std::any_of(reports.begin(), reports.end(), [](const Report& r) { return r.has_findings(); })
             ? kFindings
             : kClean;
}

int cmd_analyze(const std::vector<std::string>& files, const CommonFlags& f, bool spectre) {
  AnalysisOptions opts = options_from(f);
  opts.spectre = spectre;
  auto reports = run_parallel(files, [&](const std::string& path) {
    return make_report(analyze(load_program(path), opts), path, opts);
  });
  emit(reports, f);
  return exit_for(reports);
}

std::string patched_path(const std::string& path) {
  fs::path p(path);
  const std::string stem = p.extension() == ".ir" ? p.stem().string() : p.filename().string();
  return (p.parent_path() / (stem + ".patched.ir")).string();
}

int cmd_repair(const std::vector<std::string>& files, const CommonFlags& f) {
  const AnalysisOptions opts = options_from(f);
  auto reports = run_parallel(files, [&](const std::string& path) {
    Program p = load_program(path);
    Analysis a = analyze(p, opts);
    write_file(patched_path(path), print_program(apply_fences(p, plan_fences(a.detections))));
    return make_report(a, path, opts);
  });
  emit(reports, f);
  return exit_for(reports);
}

std::string trace_line(const Program& p, const TraceEvent& e) {
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
  return j.dump();
}

int cmd_simulate(const std::string& file, const std::string& input, const std::string& mispredict,
                 int max_depth, const CommonFlags& f) {
  const Program p = load_program(file);
  SimInput in;
  SimOptions opts;
  try {
    if (!input.empty()) in = parse_sim_input(read_file(input));
    opts.policy = MispredictPolicy::parse(mispredict);
    if (!f.geometry.empty()) opts.geometry = CacheGeometry::parse(f.geometry);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  opts.sew = f.sew;
  opts.max_depth = max_depth;
  const SpecTrace t = simulate(p, in, opts);
  std::string text;
  for (const auto& e : t.events) text += trace_line(p, e) + "\n";
  text += nlohmann::ordered_json{{"status", t.status == TraceStatus::halted ? "halted" : "faulted"},
                                 {"events", t.events.size()}}
              .dump() +
          "\n";
  if (f.out.empty()) std::cout << text;
  else write_file(f.out, text);
  return t.status == TraceStatus::faulted ? kFindings : kClean;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Static detection and repair of speculative-execution leaks in IR programs"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  std::vector<std::string> files;
  CommonFlags flags;

  auto* analyze_cmd = app.add_subcommand("analyze", "report Spectre and Meltdown findings");
  analyze_cmd->add_option("files", files, "IR programs")->required()->check(CLI::ExistingFile);
  add_common(analyze_cmd, flags);

  auto* repair_cmd = app.add_subcommand("repair", "insert fences and write FILE.patched.ir");
  repair_cmd->add_option("files", files, "IR programs")->required()->check(CLI::ExistingFile);
  add_common(repair_cmd, flags);

  std::string sim_file, sim_input, mispredict = "none";
  int max_depth = 1;
  auto* sim_cmd = app.add_subcommand("simulate", "run one program and print its trace");
  sim_cmd->add_option("file", sim_file, "IR program")->required()->check(CLI::ExistingFile);
  sim_cmd->add_option("--input", sim_input, "source bytes and initial memory");
  sim_cmd->add_option("--mispredict", mispredict, "all, none, or SITE:taken|fallthrough|wrong,...");
  sim_cmd->add_option("--max-depth", max_depth, "nested mispredictions per episode")
      ->check(CLI::Range(1, 2));
  sim_cmd->add_option("--sew", flags.sew, "speculative execution window")->check(CLI::PositiveNumber);
  sim_cmd->add_option("--cache-geometry", flags.geometry, "SETS:WAYS:LINESIZE");
  sim_cmd->add_option("--out", flags.out, "write the trace here instead of stdout");

  auto* scan_cmd = app.add_subcommand("scan-malware", "report Meltdown and Prime+Probe sequences");
  scan_cmd->add_option("files", files, "IR programs")->required()->check(CLI::ExistingFile);
  add_common(scan_cmd, flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kClean : kUsage;
  }

  try {
    if (analyze_cmd->parsed()) return cmd_analyze(files, flags, true);
    if (repair_cmd->parsed()) return cmd_repair(files, flags);
    if (scan_cmd->parsed()) return cmd_analyze(files, flags, false);
    return cmd_simulate(sim_file, sim_input, mispredict, max_depth, flags);
  } catch (const UsageError& e) {
    std::cerr << "specguard: " << e.what() << "\n";
    return kUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "specguard: " << e.what() << "\n";
    return kUsage;
  } catch (const StepBudgetExceeded& e) {
    std::cerr << "specguard: " << e.what() << "\n";
    return kUsage;
  }
}
