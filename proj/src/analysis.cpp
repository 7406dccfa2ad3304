#include "specguard/analysis.hpp"

#include <algorithm>

namespace specguard {

namespace {

void append_unique(std::vector<std::string>& out, const std::vector<std::string>& more) {
  for (const auto& w : more)
    if (std::find(out.begin(), out.end(), w) == out.end()) out.push_back(w);
}

}  // namespace

Analysis analyze(Program p, const AnalysisOptions& opts) {
  return analyze(std::make_shared<const Program>(std::move(p)), opts);
}

Analysis analyze(std::shared_ptr<const Program> p, const AnalysisOptions& opts) {
  Cfg cfg = build_cfg(p);
  Cdg cdg = control_dependence(cfg);
  auto values = std::make_shared<const ValueSet>(value_set_analysis(cfg));
  DefUse du = reaching_definitions(cfg, values);
  TaintState seed = seed_taints(*p, cfg, opts.taint);
  TaintState taint = propagate(cfg, du, cdg, seed, opts.taint.mode);

  Analysis a{p, std::move(cfg), std::move(cdg), std::move(values), std::move(du), std::move(taint),
             {}, {}, {}, {}, {}};
  a.tainted_branches = tainted_branches(a.cfg, a.taint);
  if (opts.spectre) {
    auto v1 = detect_v1(a.cfg, a.taint, a.du, opts.window);
    auto weak = detect_v1_weak(a.cfg, a.taint, opts.window);
    auto v11 = detect_v1_1(a.cfg, a.taint, a.du, opts.window);
    a.detections = std::move(v1);
    a.detections.insert(a.detections.end(), weak.begin(), weak.end());
    a.detections.insert(a.detections.end(), v11.begin(), v11.end());
    std::sort(a.detections.begin(), a.detections.end(), detection_less);
  }
  if (opts.meltdown) {
    const auto names = protected_regions(*p, opts.extra_protected);
    a.meltdown = detect_meltdown(a.cfg, a.du, names);
    if (opts.geometry) a.malware = detect_malware(a.cfg, a.du, *opts.geometry, names, opts.window.sew);
  }
  append_unique(a.warnings, a.cfg.warnings());
  append_unique(a.warnings, a.cdg.warnings());
  append_unique(a.warnings, a.values->warnings());
  append_unique(a.warnings, a.du.warnings());
  append_unique(a.warnings, seed.warnings());
  return a;
}

}  // namespace specguard
