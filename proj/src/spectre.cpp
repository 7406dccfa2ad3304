#include "specguard/spectre.hpp"

#include <algorithm>
#include <tuple>
#include <unordered_map>

namespace specguard {

std::string_view to_string(DetectionKind k) {
  switch (k) {
    case DetectionKind::V1: return "V1";
    case DetectionKind::V1_WEAK: return "V1_WEAK";
    case DetectionKind::V1_1: return "V1_1";
    case DetectionKind::V1_2: return "V1_2";
  }
  return "?";
}

std::optional<DetectionKind> parse_detection_kind(std::string_view text) {
  for (auto k : {DetectionKind::V1, DetectionKind::V1_WEAK, DetectionKind::V1_1, DetectionKind::V1_2})
    if (to_string(k) == text) return k;
  return std::nullopt;
}

bool detection_less(const Detection& a, const Detection& b) {
  auto key = [](const Detection& d) {
    return std::make_tuple(d.tb, d.anchor(), d.ls.value_or(0), static_cast<int>(d.kind));
  };
  return key(a) < key(b);
}

std::vector<InstId> tainted_branches(const Cfg& cfg, const TaintState& ts) {
  std::vector<InstId> out;
  for (const auto& inst : cfg.program().instructions())
    if (inst.opcode == Opcode::branch && ts.instruction(inst.id)) out.push_back(inst.id);
  return out;
}

namespace {

bool is_load(const Program& p, InstId i) { return p.instruction(i).opcode == Opcode::load; }

void sort_unique(std::vector<Detection>& dets) {
  std::sort(dets.begin(), dets.end(), detection_less);
  dets.erase(std::unique(dets.begin(), dets.end(),
                         [](const Detection& a, const Detection& b) {
                           return !detection_less(a, b) && !detection_less(b, a);
                         }),
             dets.end());
}

}  // namespace

std::vector<Detection> detect_v1(const Cfg& cfg, const TaintState& ts, const DefUse& du,
                                 SpecWindow w) {
  const Program& p = cfg.program();
  std::vector<InstId> leak_sites;
  for (const auto& inst : p.instructions())
    if (inst.is_memory() && ts.address(inst.id)) leak_sites.push_back(inst.id);

  struct RsFacts {
    DepClosure closure;
    std::vector<std::uint64_t> dist;
  };
  std::unordered_map<InstId, RsFacts> cache;
  auto facts = [&](InstId rs) -> const RsFacts& {
    auto it = cache.find(rs);
    if (it == cache.end())
      it = cache.emplace(rs, RsFacts{DepClosure(du, rs), distances_from(cfg, rs, true)}).first;
    return it->second;
  };

  std::vector<Detection> out;
  for (InstId tb : tainted_branches(cfg, ts)) {
    const auto dist = distances_from(cfg, tb, true);
    for (InstId rs : leak_sites) {
      if (!is_load(p, rs) || dist[rs] > w.sew) continue;
      const RsFacts& f = facts(rs);
      for (InstId ls : leak_sites) {
        if (ls == rs || dist[ls] > w.sew || f.dist[ls] == kInfinity) continue;
        if (!f.closure.depends(AddressOf{ls})) continue;
        Detection d;
        d.kind = DetectionKind::V1;
        d.tb = tb;
        d.rs = rs;
        d.ls = ls;
        d.deltas = {{"tb_rs", dist[rs]}, {"tb_ls", dist[ls]}, {"rs_ls", f.dist[ls]}};
        d.witnesses = {{"tb", ts.chain(tb)},
                       {"addr_rs", ts.address_chain(rs)},
                       {"addr_ls", ts.address_chain(ls)}};
        out.push_back(std::move(d));
      }
    }
  }
  sort_unique(out);
  return out;
}

std::vector<Detection> detect_v1_weak(const Cfg& cfg, const TaintState& ts, SpecWindow w) {
  const Program& p = cfg.program();
  std::vector<Detection> out;
  for (InstId tb : tainted_branches(cfg, ts)) {
    const auto dist = distances_from(cfg, tb, true);
    for (const auto& inst : p.instructions()) {
      if (inst.opcode != Opcode::load || !ts.address(inst.id) || dist[inst.id] > w.sew) continue;
      Detection d;
      d.kind = DetectionKind::V1_WEAK;
      d.tb = tb;
      d.rs = inst.id;
      d.deltas = {{"tb_rs", dist[inst.id]}};
      d.witnesses = {{"tb", ts.chain(tb)}, {"addr_rs", ts.address_chain(inst.id)}};
      out.push_back(std::move(d));
    }
  }
  sort_unique(out);
  return out;
}

std::vector<Detection> detect_v1_1(const Cfg& cfg, const TaintState& ts, const DefUse& du,
                                   SpecWindow w) {
  const Program& p = cfg.program();
  std::vector<Detection> out;
  for (InstId tb : tainted_branches(cfg, ts)) {
    const auto dist = distances_from(cfg, tb, true);
    for (const auto& inst : p.instructions()) {
      if (inst.opcode != Opcode::store || !ts.address(inst.id) || dist[inst.id] > w.sew) continue;
      const AbstractLoc& loc = *du.location(inst.id);
      const std::string& named = inst.memref()->region.empty() ? loc.region : inst.memref()->region;
      const Region* region = p.find_region(named);
      Detection d;
      d.kind = region && region->readonly ? DetectionKind::V1_2 : DetectionKind::V1_1;
      d.tb = tb;
      d.sw = inst.id;
      d.deltas = {{"tb_sw", dist[inst.id]}};
      d.witnesses = {{"tb", ts.chain(tb)}, {"addr_sw", ts.address_chain(inst.id)}};
      out.push_back(std::move(d));
    }
  }
  sort_unique(out);
  return out;
}

}  // namespace specguard
