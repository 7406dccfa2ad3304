#include "oracles.hpp"

#include <algorithm>
#include <deque>

namespace specguard::testing {

std::vector<InstId> successors_of(const Program& p, InstId i) {
  const Instruction& inst = p.instruction(i);
  auto first_of = [&](BlockId b) { return p.block(b).instructions.front(); };
  std::vector<InstId> out;
  switch (inst.opcode) {
    case Opcode::halt:
      break;
    case Opcode::branch:
    case Opcode::jump:
      for (BlockId b : inst.targets) out.push_back(first_of(b));
      break;
    default: {
      const auto& in_block = p.block(inst.block).instructions;
      if (i != in_block.back()) out.push_back(i + 1);
      else if (inst.block + 1 < p.blocks().size()) out.push_back(first_of(inst.block + 1));
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::uint64_t bfs_distance(const Program& p, InstId a, InstId b, bool fence_cut) {
  if (a == b) return 0;
  std::vector<std::uint64_t> dist(p.size(), kUnreachable);
  std::deque<InstId> queue{a};
  dist[a] = 0;
  while (!queue.empty()) {
    const InstId u = queue.front();
    queue.pop_front();
    if (u != a && fence_cut && p.instruction(u).opcode == Opcode::fence) continue;
    for (InstId v : successors_of(p, u)) {
      if (dist[v] != kUnreachable) continue;
      dist[v] = dist[u] + 1;
      if (v == b) return dist[v];
      queue.push_back(v);
    }
  }
  return kUnreachable;
}

namespace {

bool defines(const Instruction& inst, RegId reg) { return inst.dest && *inst.dest == reg; }

}  // namespace

std::vector<InstId> reaching_register_defs(const Program& p, InstId use, RegId reg) {
  std::vector<InstId> out;
  for (const auto& d : p.instructions()) {
    if (!defines(d, reg)) continue;
    // Walk forward from d; stop at other definitions of reg.
    std::vector<char> seen(p.size(), 0);
    std::deque<InstId> queue;
    for (InstId s : successors_of(p, d.id)) queue.push_back(s);
    bool reaches = false;
    while (!queue.empty() && !reaches) {
      const InstId u = queue.front();
      queue.pop_front();
      if (seen[u]) continue;
      seen[u] = 1;
      if (u == use) {
        reaches = true;
        break;
      }
      if (defines(p.instruction(u), reg)) continue;
      for (InstId s : successors_of(p, u)) queue.push_back(s);
    }
    if (reaches) out.push_back(d.id);
  }
  return out;
}

namespace {

// Can `from` reach a halt without executing `avoid`?
bool escapes(const Program& p, InstId from, InstId avoid) {
  if (from == avoid) return false;
  std::vector<char> seen(p.size(), 0);
  std::deque<InstId> queue{from};
  while (!queue.empty()) {
    const InstId u = queue.front();
    queue.pop_front();
    if (seen[u] || u == avoid) continue;
    seen[u] = 1;
    if (p.instruction(u).opcode == Opcode::halt) return true;
    for (InstId s : successors_of(p, u)) queue.push_back(s);
  }
  return false;
}

}  // namespace

bool control_dependent(const Program& p, InstId inst, InstId branch) {
  if (p.instruction(branch).opcode != Opcode::branch) return false;
  const auto succ = successors_of(p, branch);
  bool forced = false;
  for (InstId s : succ) forced = forced || !escapes(p, s, inst);
  // inst must not strictly postdominate the branch.
  return forced && (inst == branch || escapes(p, branch, inst));
}

std::uint64_t set_index(std::uint64_t address, std::uint64_t line_size, std::uint64_t num_sets) {
  return (address / line_size) % num_sets;
}

}  // namespace specguard::testing

#include "specguard/dependence.hpp"

namespace specguard::testing {

namespace {

// Committed value per instruction; the fuzz programs are acyclic, so each
// instruction commits at most once.
std::vector<std::optional<std::uint64_t>> committed_values(const Program& p, const SpecTrace& t,
                                                           std::vector<char>& ran) {
  std::vector<std::optional<std::uint64_t>> out(p.size());
  ran.assign(p.size(), 0);
  for (const auto& e : t.events) {
    if (e.kind != EventKind::commit) continue;
    ran[e.inst] = 1;
    out[e.inst] = e.value;
  }
  return out;
}

}  // namespace

std::vector<std::string> taint_oracle_violations(const Program& p, const TaintState& ts,
                                                 const SimInput& input) {
  std::vector<std::string> out;
  SimOptions opts;
  const SpecTrace base = simulate(p, input, opts);
  std::vector<char> base_ran;
  const auto base_vals = committed_values(p, base, base_ran);

  for (const auto& [name, bytes] : input.sources) {
    for (std::size_t k = 0; k < bytes.size(); ++k) {
      SimInput flipped = input;
      flipped.sources[name][k] ^= 0xff;
      const SpecTrace t = simulate(p, flipped, opts);
      std::vector<char> ran;
      const auto vals = committed_values(p, t, ran);
      const std::string where = " (flip " + name + "[" + std::to_string(k) + "])";
      for (InstId i = 0; i < p.size(); ++i)
        if (ran[i] && base_ran[i] && vals[i] != base_vals[i] && !ts.instruction(i))
          out.push_back("instruction " + std::to_string(i) + " changed but is untainted" + where);
      for (const auto& [region, contents] : t.memory) {
        const auto& before = base.memory.at(region);
        for (std::size_t off = 0; off < contents.size(); ++off)
          if (contents[off] != before[off] &&
              !ts.value_at(AbstractLoc{region, AbsValue::exact(off), 1}))
            out.push_back(region + "+" + std::to_string(off) + " changed but is untainted" + where);
      }
      if (t.loose_memory != base.loose_memory &&
          !ts.value_at(AbstractLoc{std::string(kUnknownRegion), AbsValue::top(), 1}))
        out.push_back("memory outside regions changed but is untainted" + where);
    }
  }
  return out;
}

}  // namespace specguard::testing
