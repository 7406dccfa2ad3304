// Acceptance suite: one PASS/FAIL line per criterion.  Every bound below is
// exact unless it is a runtime limit.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "corpus.hpp"
#include "fuzz.hpp"
#include "oracles.hpp"
#include "specguard/analysis.hpp"
#include "specguard/repair.hpp"
#include "specguard/simulator.hpp"

using namespace specguard;
using namespace specguard::testing;

namespace {

constexpr double kLitmusSeconds = 5.0;
constexpr double kRepairSeconds = 30.0;
constexpr double kRecallSeconds = 60.0;
constexpr double kDifferentialSeconds = 600.0;
constexpr double kMalwareSeconds = 5.0;

constexpr std::uint64_t kFuzzSeed = 0x5eed2026;
constexpr std::size_t kFuzzPrograms = 1000;
constexpr std::size_t kTaintOraclePrograms = 200;
constexpr std::size_t kRandomCfgs = 50;
constexpr std::size_t kMaxCfgBlocks = 30;

struct Outcome {
  bool pass = true;
  std::string detail;
};

AnalysisOptions options(TaintMode mode = TaintMode::program_dep, std::uint64_t sew = kDefaultSew) {
  AnalysisOptions o;
  o.taint.mode = mode;
  o.window.sew = sew;
  return o;
}

bool flags_v1(const Analysis& a) {
  return std::any_of(a.detections.begin(), a.detections.end(), [](const Detection& d) {
    return d.kind == DetectionKind::V1 || d.kind == DetectionKind::V1_WEAK;
  });
}

std::size_t count_kind(const std::vector<Detection>& dets, DetectionKind k) {
  return static_cast<std::size_t>(
      std::count_if(dets.begin(), dets.end(), [&](const Detection& d) { return d.kind == k; }));
}

InstId first_branch(const Program& p) {
  for (const auto& i : p.instructions())
    if (i.opcode == Opcode::branch) return i.id;
  return 0;
}

const std::vector<Program>& fuzz_corpus() {
  static const std::vector<Program> corpus = [] {
    Rng rng(kFuzzSeed);
    std::vector<Program> out;
    for (std::size_t k = 0; k < kFuzzPrograms; ++k) out.push_back(random_program(rng));
    return out;
  }();
  return corpus;
}

// Secret contents compared pairwise; byte 0 is what the litmus inputs read.
const std::vector<std::pair<std::uint8_t, std::uint8_t>> kSecretPairs = {
    {1, 2}, {3, 200}, {5, 6}, {0, 255}, {17, 34}, {100, 101}, {9, 5}, {128, 64}};

Outcome litmus_fidelity() {
  std::vector<std::string> missed_dep, flagged_data;
  for (const auto& name : litmus_names()) {
    const Program p = load_corpus_program("litmus/" + name + ".ir");
    if (!flags_v1(analyze(p, options(TaintMode::program_dep)))) missed_dep.push_back(name);
    if (flags_v1(analyze(p, options(TaintMode::data_only)))) flagged_data.push_back(name);
  }
  Outcome o;
  std::ostringstream os;
  os << "program_dep flags " << 15 - missed_dep.size() << "/15, data_only flags "
     << flagged_data.size() << "/15";
  const bool data_ok = flagged_data.size() == 14 &&
                       std::find(flagged_data.begin(), flagged_data.end(), "v13") == flagged_data.end();
  if (!data_ok && flagged_data.size() == 15) os << " (v13 flagged in data_only)";
  o.pass = missed_dep.empty() && data_ok;
  o.detail = os.str();
  return o;
}

Outcome repair_soundness() {
  SimOptions sim;
  sim.policy = MispredictPolicy::always();
  std::size_t leaking = 0;
  std::vector<std::string> bad;
  for (const auto& name : litmus_names()) {
    const Program p = load_corpus_program("litmus/" + name + ".ir");
    const SimInput in = load_corpus_input("litmus/" + name + ".input");
    auto leaks = [&](const Program& prog) {
      std::size_t n = 0;
      for (const auto& [a, b] : kSecretPairs) {
        const auto ta = simulate(prog, with_memory(in, "secret", {a}), sim);
        const auto tb = simulate(prog, with_memory(in, "secret", {b}), sim);
        n += leaks_secret(ta, tb, "secret");
      }
      return n;
    };
    if (leaks(p) == 0) continue;
    ++leaking;
    const Program patched = apply_fences(p, plan_fences(analyze(p, options()).detections));
    if (leaks(patched) != 0) bad.push_back(name + " still leaks");
    if (!analyze(patched, options()).detections.empty()) bad.push_back(name + " still detected");
  }
  Outcome o;
  o.pass = bad.empty() && leaking > 0;
  o.detail = std::to_string(leaking) + " leaking litmus programs repaired";
  for (const auto& b : bad) o.detail += "; " + b;
  return o;
}

Outcome gadget_recall() {
  Rng rng(kFuzzSeed + 3);
  Outcome o;
  std::ostringstream os;
  for (std::size_t k : {1, 5, 10, 25}) {
    const Program p = parse_program(spliced_program_text(rng, 200, k));
    const Analysis a = analyze(p, options());
    std::size_t found = 0;
    for (std::size_t j = 0; j < k; ++j) {
      const std::string g = "g" + std::to_string(j);
      const InstId tb = p.block(*p.find_block(g + "_check")).instructions.back();
      const InstId rs = p.block(*p.find_block(g + "_body")).instructions.front();
      found += std::any_of(a.detections.begin(), a.detections.end(), [&](const Detection& d) {
        return d.kind == DetectionKind::V1 && d.tb == tb && d.rs == rs;
      });
    }
    os << "k=" << k << ":" << found << "/" << k << " ";
    o.pass = o.pass && found == k;
  }
  o.detail = os.str();
  return o;
}

Outcome differential() {
  Rng rng(kFuzzSeed + 4);
  std::size_t violations = 0, leaks = 0, runs = 0, trainable = 0, skipped = 0;
  for (const auto& p : fuzz_corpus()) {
    DiffConfig cfg;
    for (int k = 0; k < 4; ++k) cfg.inputs.push_back(random_input(rng));
    cfg.secret_region = "secret";
    for (int k = 0; k < 2; ++k) {
      std::vector<std::uint8_t> a(64), b(64);
      for (std::size_t i = 0; i < 64; ++i) {
        a[i] = static_cast<std::uint8_t>(rng());
        b[i] = static_cast<std::uint8_t>(a[i] + 1 + rng() % 255);
      }
      cfg.secret_pairs.emplace_back(a, b);
    }
    const DiffVerdict v = differential_check(p, analyze(p, options()).detections, cfg);
    violations += !v.pass;
    leaks += v.leaks.size();
    runs += v.runs;
    trainable += v.trainable.size();
    skipped += v.skipped;
  }
  Outcome o;
  o.pass = violations == 0;
  o.detail = std::to_string(violations) + " violations over " + std::to_string(kFuzzPrograms) +
             " programs (" + std::to_string(trainable) + " trainable branches, " + std::to_string(runs) +
             " runs, " + std::to_string(skipped) + " skipped, " + std::to_string(leaks) + " leaks)";
  return o;
}

Outcome window_monotonicity() {
  using Key = std::tuple<int, InstId, InstId, InstId>;
  auto keys = [](const std::vector<Detection>& dets) {
    std::set<Key> out;
    for (const auto& d : dets)
      out.emplace(static_cast<int>(d.kind), d.tb, d.anchor(), d.ls.value_or(0));
    return out;
  };
  std::size_t violations = 0;
  for (const auto& p : fuzz_corpus()) {
    const auto narrow = keys(analyze(p, options(TaintMode::program_dep, 64)).detections);
    const auto wide = keys(analyze(p, options(TaintMode::program_dep, 448)).detections);
    violations += !std::includes(wide.begin(), wide.end(), narrow.begin(), narrow.end());
  }

  // Pad v01 so the RS sits 449 instructions after the TB.
  std::string text = read_text(corpus_path("litmus/v01.ir"));
  std::string pad;
  for (int k = 0; k < 448; ++k) pad += "  pad = add pad, 1\n";
  text.replace(text.find("body:\n") + 6, 0, pad);
  const Program padded = parse_program(text);
  const InstId tb = first_branch(padded);
  const Analysis at448 = analyze(padded, options(TaintMode::program_dep, 448));
  const Analysis at512 = analyze(padded, options(TaintMode::program_dep, 512));
  const InstId rs = padded.block(*padded.find_block("body")).instructions[448];
  const std::uint64_t delta = instruction_distance(at448.cfg, tb, rs, true);

  Outcome o;
  const std::size_t v1_512 = count_kind(at512.detections, DetectionKind::V1);
  o.pass = violations == 0 && delta == 449 && at448.detections.empty() && v1_512 == 1;
  o.detail = std::to_string(violations) + " subset violations; padded delta " + std::to_string(delta) +
             ", detections at 448: " + std::to_string(at448.detections.size()) +
             ", V1 at 512: " + std::to_string(v1_512);
  return o;
}

Outcome distance_oracle() {
  Rng rng(kFuzzSeed + 6);
  std::size_t mismatches = 0, pairs = 0;
  for (std::size_t g = 0; g < kRandomCfgs; ++g) {
    const Program p = random_cfg_program(rng, kMaxCfgBlocks);
    const Cfg cfg = build_cfg(p);
    for (InstId a = 0; a < p.size(); ++a)
      for (InstId b = 0; b < p.size(); ++b)
        for (bool cut : {false, true}) {
          ++pairs;
          const std::uint64_t want = bfs_distance(p, a, b, cut);
          const std::uint64_t got = instruction_distance(cfg, a, b, cut);
          mismatches += (want == kUnreachable ? got != kInfinity : got != want);
        }
  }
  Outcome o;
  o.pass = mismatches == 0;
  o.detail = std::to_string(mismatches) + " mismatches over " + std::to_string(pairs) + " pairs";
  return o;
}

Outcome taint_oracle() {
  Rng rng(kFuzzSeed + 7);
  std::size_t violations = 0;
  std::string first;
  for (std::size_t k = 0; k < kTaintOraclePrograms; ++k) {
    const Program& p = fuzz_corpus()[k];
    const Analysis a = analyze(p, options());
    const auto v = taint_oracle_violations(p, a.taint, random_input(rng));
    if (!v.empty() && first.empty()) first = "program " + std::to_string(k) + ": " + v.front();
    violations += v.size();
  }
  Outcome o;
  o.pass = violations == 0;
  o.detail = std::to_string(violations) + " violations over " + std::to_string(kTaintOraclePrograms) +
             " programs" + (first.empty() ? "" : "; first: " + first);
  return o;
}

Outcome malware() {
  AnalysisOptions opts = options();
  opts.geometry = CacheGeometry::parse("16:4:64");
  auto run = [&](const std::string& name) { return analyze(load_corpus_program("malware/" + name), opts); };
  const Analysis poc = run("meltdown_poc.ir");
  const Analysis full = run("prime_probe.ir");
  const Analysis shortp = run("prime_probe_short.ir");
  const Analysis disjoint = run("prime_probe_disjoint.ir");
  Outcome o;
  o.pass = poc.meltdown.size() == 1 && full.malware.size() == 1 && shortp.malware.empty() &&
           disjoint.malware.empty();
  o.detail = "meltdown PoC " + std::to_string(poc.meltdown.size()) + ", prime+probe " +
             std::to_string(full.malware.size()) + ", short prime " + std::to_string(shortp.malware.size()) +
             ", disjoint set " + std::to_string(disjoint.malware.size());
  return o;
}

Outcome fence_economy() {
  std::size_t violations = 0, fences_total = 0;
  for (const auto& p : fuzz_corpus()) {
    const Analysis a = analyze(p, options());
    const PatchPlan plan = plan_fences(a.detections);
    std::set<InstId> anchors;
    for (const auto& d : a.detections) anchors.insert(d.anchor());
    bool ok = plan.patches.size() <= anchors.size() && anchors.size() <= a.detections.size();
    for (const auto& patch : plan.patches) {
      ok = ok && !patch.reasons.empty();
      for (std::size_t r : patch.reasons) {
        const Detection& d = a.detections.at(r);
        ok = ok && d.anchor() == patch.anchor &&
             std::binary_search(a.tainted_branches.begin(), a.tainted_branches.end(), d.tb);
      }
    }
    const Program patched = apply_fences(p, plan);
    auto fences = [](const Program& q) {
      return std::count_if(q.instructions().begin(), q.instructions().end(),
                           [](const Instruction& i) { return i.opcode == Opcode::fence; });
    };
    ok = ok && static_cast<std::size_t>(fences(patched) - fences(p)) == plan.patches.size();
    violations += !ok;
    fences_total += plan.patches.size();
  }
  Outcome o;
  o.pass = violations == 0;
  o.detail = std::to_string(violations) + " violations; " + std::to_string(fences_total) +
             " fences across " + std::to_string(kFuzzPrograms) + " programs";
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
    double limit;  // seconds; 0 means no runtime bound
  };
  const std::vector<Criterion> criteria = {
      {1, "litmus corpus fidelity", litmus_fidelity, kLitmusSeconds},
      {2, "repair soundness", repair_soundness, kRepairSeconds},
      {3, "injected-gadget recall", gadget_recall, kRecallSeconds},
      {4, "differential no-false-negative fuzzing", differential, kDifferentialSeconds},
      {5, "window monotonicity and cutoff", window_monotonicity, 0},
      {6, "distance oracle", distance_oracle, 0},
      {7, "taint over-approximation oracle", taint_oracle, 0},
      {8, "meltdown and prime+probe", malware, kMalwareSeconds},
      {9, "fence economy", fence_economy, 0},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.limit > 0 && secs > c.limit) {
      o.pass = false;
      o.detail += "; over time limit";
    }
    failures += !o.pass;
    std::printf("%s %d %s: %s [%.2f s]\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
