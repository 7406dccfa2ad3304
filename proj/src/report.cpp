#include "specguard/report.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace specguard {

using nlohmann::ordered_json;

Report make_report(const Analysis& a, std::string program_name, const AnalysisOptions& opts) {
  Report r;
  r.program = std::move(program_name);
  r.mode = opts.taint.mode;
  r.sew = opts.window.sew;
  r.tainted_branches = a.tainted_branches;
  r.detections = a.detections;
  r.meltdown = a.meltdown;
  r.malware = a.malware;
  r.warnings = a.warnings;
  for (const auto& d : a.detections) {
    if (d.kind == DetectionKind::V1) r.tb_rs.emplace_back(d.tb, *d.rs);
    if (d.kind == DetectionKind::V1_1 || d.kind == DetectionKind::V1_2) r.tb_sw.emplace_back(d.tb, *d.sw);
  }
  for (auto* pairs : {&r.tb_rs, &r.tb_sw}) {
    std::sort(pairs->begin(), pairs->end());
    pairs->erase(std::unique(pairs->begin(), pairs->end()), pairs->end());
  }
  for (const auto& inst : a.program->instructions())
    if (inst.opcode == Opcode::branch) ++r.counts.conditional_branches;
  r.counts.tb = r.tainted_branches.size();
  r.counts.tb_rs = r.tb_rs.size();
  r.counts.tb_sw = r.tb_sw.size();
  r.counts.meltdown = r.meltdown.size();
  r.counts.malware = r.malware.size();
  return r;
}

namespace {

ordered_json witness_json(const std::vector<Witness>& chain) {
  ordered_json out = ordered_json::array();
  for (const auto& w : chain) {
    ordered_json j;
    j["inst"] = w.inst;
    j["rule"] = std::string(to_string(w.rule));
    j["parent"] = w.parent ? ordered_json(*w.parent) : ordered_json(nullptr);
    out.push_back(std::move(j));
  }
  return out;
}

TaintRule parse_rule(const std::string& s) {
  for (int k = 0; k <= static_cast<int>(TaintRule::implicit); ++k)
    if (to_string(static_cast<TaintRule>(k)) == s) return static_cast<TaintRule>(k);
  throw std::runtime_error("unknown taint rule '" + s + "'");
}

std::vector<Witness> witness_from(const ordered_json& j) {
  std::vector<Witness> out;
  for (const auto& w : j) {
    Witness x;
    x.inst = w.at("inst").get<InstId>();
    x.rule = parse_rule(w.at("rule").get<std::string>());
    if (!w.at("parent").is_null()) x.parent = w.at("parent").get<InstId>();
    out.push_back(x);
  }
  return out;
}

ordered_json detection_json(const Detection& d) {
  ordered_json j;
  j["kind"] = std::string(to_string(d.kind));
  j["tb"] = d.tb;
  if (d.rs) j["rs"] = *d.rs;
  if (d.ls) j["ls"] = *d.ls;
  if (d.sw) j["sw"] = *d.sw;
  j["deltas"] = ordered_json::object();
  for (const auto& [k, v] : d.deltas) j["deltas"][k] = v;
  j["witnesses"] = ordered_json::object();
  for (const auto& [k, v] : d.witnesses) j["witnesses"][k] = witness_json(v);
  return j;
}

Detection detection_from(const ordered_json& j) {
  Detection d;
  auto kind = parse_detection_kind(j.at("kind").get<std::string>());
  if (!kind) throw std::runtime_error("unknown detection kind");
  d.kind = *kind;
  d.tb = j.at("tb").get<InstId>();
  if (j.contains("rs")) d.rs = j["rs"].get<InstId>();
  if (j.contains("ls")) d.ls = j["ls"].get<InstId>();
  if (j.contains("sw")) d.sw = j["sw"].get<InstId>();
  for (const auto& [k, v] : j.at("deltas").items()) d.deltas[k] = v.get<std::uint64_t>();
  for (const auto& [k, v] : j.at("witnesses").items()) d.witnesses[k] = witness_from(v);
  return d;
}

ordered_json finding_json(const MalwareFinding& f) {
  ordered_json j;
  j["kind"] = std::string(to_string(f.kind));
  j["ua"] = f.ua;
  j["ls"] = f.ls;
  if (f.kind == MalwareKind::PRIME_PROBE) {
    j["cache_set"] = f.cache_set ? ordered_json(*f.cache_set) : ordered_json(nullptr);
    j["prime_seq"] = f.prime_seq;
    ordered_json probes = ordered_json::array();
    for (const auto& t : f.probe_seq) probes.push_back({t.t_start, t.inst, t.t_end});
    j["probe_seq"] = std::move(probes);
  }
  return j;
}

MalwareFinding finding_from(const ordered_json& j) {
  MalwareFinding f;
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "MELTDOWN") f.kind = MalwareKind::MELTDOWN;
  else if (kind == "PRIME_PROBE") f.kind = MalwareKind::PRIME_PROBE;
  else throw std::runtime_error("unknown finding kind '" + kind + "'");
  f.ua = j.at("ua").get<InstId>();
  f.ls = j.at("ls").get<InstId>();
  if (f.kind == MalwareKind::PRIME_PROBE) {
    if (!j.at("cache_set").is_null()) f.cache_set = j["cache_set"].get<std::uint64_t>();
    f.prime_seq = j.at("prime_seq").get<std::vector<InstId>>();
    for (const auto& t : j.at("probe_seq"))
      f.probe_seq.push_back({t.at(0).get<InstId>(), t.at(1).get<InstId>(), t.at(2).get<InstId>()});
  }
  return f;
}

ordered_json pairs_json(const std::vector<std::pair<InstId, InstId>>& pairs) {
  ordered_json out = ordered_json::array();
  for (const auto& [a, b] : pairs) out.push_back({a, b});
  return out;
}

std::vector<std::pair<InstId, InstId>> pairs_from(const ordered_json& j) {
  std::vector<std::pair<InstId, InstId>> out;
  for (const auto& p : j) out.emplace_back(p.at(0).get<InstId>(), p.at(1).get<InstId>());
  return out;
}

std::string text_report(const Report& r) {
  std::ostringstream os;
  os << "program: " << r.program << "\n"
     << "mode: " << to_string(r.mode) << "  sew: " << r.sew << "\n"
     << "conditional branches: " << r.counts.conditional_branches
     << "  tainted: " << r.counts.tb << "  <TB,RS>: " << r.counts.tb_rs
     << "  <TB,SW>: " << r.counts.tb_sw << "  meltdown: " << r.counts.meltdown
     << "  malware: " << r.counts.malware << "\n";
  for (const auto& d : r.detections) {
    os << to_string(d.kind) << " tb=" << d.tb;
    if (d.rs) os << " rs=" << *d.rs;
    if (d.ls) os << " ls=" << *d.ls;
    if (d.sw) os << " sw=" << *d.sw;
    const char* sep = " (";
    for (const auto& [k, v] : d.deltas) {
      os << sep << k << "=" << v;
      sep = " ";
    }
    os << (d.deltas.empty() ? "" : ")") << "\n";
  }
  for (const auto* list : {&r.meltdown, &r.malware})
    for (const auto& f : *list) {
      os << to_string(f.kind) << " ua=" << f.ua << " ls=" << f.ls;
      if (f.cache_set) os << " set=" << *f.cache_set;
      if (!f.prime_seq.empty()) {
        os << " prime=[";
        for (std::size_t k = 0; k < f.prime_seq.size(); ++k) os << (k ? "," : "") << f.prime_seq[k];
        os << "] probe=[";
        for (std::size_t k = 0; k < f.probe_seq.size(); ++k) os << (k ? "," : "") << f.probe_seq[k].inst;
        os << "]";
      }
      os << "\n";
    }
  for (const auto& w : r.warnings) os << "warning: " << w << "\n";
  return os.str();
}

}  // namespace

std::string emit_report(const Report& r, ReportFormat format) {
  if (format == ReportFormat::text) return text_report(r);
  ordered_json j;
  j["version"] = r.version;
  j["program"] = r.program;
  j["mode"] = std::string(to_string(r.mode));
  j["sew"] = r.sew;
  j["counts"] = {{"conditional_branches", r.counts.conditional_branches},
                 {"tb", r.counts.tb},
                 {"tb_rs", r.counts.tb_rs},
                 {"tb_sw", r.counts.tb_sw},
                 {"meltdown", r.counts.meltdown},
                 {"malware", r.counts.malware}};
  j["tainted_branches"] = r.tainted_branches;
  j["tb_rs"] = pairs_json(r.tb_rs);
  j["tb_sw"] = pairs_json(r.tb_sw);
  j["detections"] = ordered_json::array();
  for (const auto& d : r.detections) j["detections"].push_back(detection_json(d));
  j["meltdown"] = ordered_json::array();
  for (const auto& f : r.meltdown) j["meltdown"].push_back(finding_json(f));
  j["malware"] = ordered_json::array();
  for (const auto& f : r.malware) j["malware"].push_back(finding_json(f));
  j["warnings"] = r.warnings;
  return j.dump(2) + "\n";
}

Report parse_report(std::string_view json_text) {
  try {
    const auto j = ordered_json::parse(json_text);
    Report r;
    r.version = j.at("version").get<std::string>();
    r.program = j.at("program").get<std::string>();
    auto mode = parse_taint_mode(j.at("mode").get<std::string>());
    if (!mode) throw std::runtime_error("unknown mode");
    r.mode = *mode;
    r.sew = j.at("sew").get<std::uint64_t>();
    const auto& c = j.at("counts");
    r.counts = {c.at("conditional_branches").get<std::size_t>(), c.at("tb").get<std::size_t>(),
                c.at("tb_rs").get<std::size_t>(), c.at("tb_sw").get<std::size_t>(),
                c.at("meltdown").get<std::size_t>(), c.at("malware").get<std::size_t>()};
    r.tainted_branches = j.at("tainted_branches").get<std::vector<InstId>>();
    r.tb_rs = pairs_from(j.at("tb_rs"));
    r.tb_sw = pairs_from(j.at("tb_sw"));
    for (const auto& d : j.at("detections")) r.detections.push_back(detection_from(d));
    for (const auto& f : j.at("meltdown")) r.meltdown.push_back(finding_from(f));
    for (const auto& f : j.at("malware")) r.malware.push_back(finding_from(f));
    r.warnings = j.at("warnings").get<std::vector<std::string>>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("malformed report: ") + e.what());
  }
}

}  // namespace specguard
