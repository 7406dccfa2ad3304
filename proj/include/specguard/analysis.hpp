// One-call pipeline: CFG, dependences, taint, and every detector.
#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "specguard/meltdown.hpp"
#include "specguard/spectre.hpp"

namespace specguard {

struct AnalysisOptions {
  TaintConfig taint;
  SpecWindow window;
  std::optional<CacheGeometry> geometry;  // Prime+Probe search runs only when set
  std::vector<std::string> extra_protected;
  bool spectre = true;
  bool meltdown = true;
};

struct Analysis {
  std::shared_ptr<const Program> program;
  Cfg cfg;
  Cdg cdg;
  std::shared_ptr<const ValueSet> values;
  DefUse du;
  TaintState taint;
  std::vector<InstId> tainted_branches;
  /// V1, V1_WEAK, V1_1 and V1_2 detections, sorted by (tb, rs/sw, ls).
  std::vector<Detection> detections;
  std::vector<MalwareFinding> meltdown;
  std::vector<MalwareFinding> malware;
  std::vector<std::string> warnings;

  bool has_findings() const { return !detections.empty() || !meltdown.empty() || !malware.empty(); }
};

Analysis analyze(std::shared_ptr<const Program> p, const AnalysisOptions& opts);
Analysis analyze(Program p, const AnalysisOptions& opts);

}  // namespace specguard
