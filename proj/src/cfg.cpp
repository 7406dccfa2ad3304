#include "specguard/cfg.hpp"

#include <algorithm>
#include <queue>

#include <boost/dynamic_bitset.hpp>

namespace specguard {

Cfg::Cfg(std::shared_ptr<const Program> program) : program_(std::move(program)) {
  const Program& p = *program_;
  const auto n = p.blocks().size();
  succ_.resize(n);
  pred_.resize(n);
  auto add = [&](BlockId src, BlockId dst, EdgeKind kind) {
    edges_.push_back({src, dst, kind});
    if (std::find(succ_[src].begin(), succ_[src].end(), dst) == succ_[src].end()) {
      succ_[src].push_back(dst);
      pred_[dst].push_back(src);
    }
  };
  for (BlockId b = 0; b < n; ++b) {
    const Instruction& last = p.instruction(p.block(b).instructions.back());
    switch (last.opcode) {
      case Opcode::branch:
        add(b, last.targets.at(0), EdgeKind::taken);
        add(b, last.targets.at(1), EdgeKind::fallthrough);
        break;
      case Opcode::jump:
        if (last.targets.empty())
          warnings_.push_back("indirect jump at instruction " + std::to_string(last.id) +
                              " in block '" + p.block(b).label +
                              "' has no target annotation; edge omitted");
        for (BlockId t : last.targets) add(b, t, EdgeKind::jump);
        break;
      case Opcode::halt:
        break;
      default:
        // The parser rejects a final block without a terminator.
        add(b, b + 1, EdgeKind::fallthrough);
        break;
    }
  }
}

std::vector<InstId> Cfg::next_instructions(InstId i) const {
  const Program& p = *program_;
  const Instruction& inst = p.instruction(i);
  const auto& body = p.block(inst.block).instructions;
  if (i != body.back()) return {i + 1};
  std::vector<InstId> out;
  for (BlockId s : succ_[inst.block]) out.push_back(p.block(s).instructions.front());
  return out;
}

Cfg build_cfg(std::shared_ptr<const Program> p) { return Cfg(std::move(p)); }
Cfg build_cfg(Program p) { return Cfg(std::make_shared<const Program>(std::move(p))); }

bool PostDominators::postdominates(std::uint32_t a, std::uint32_t b) const {
  for (std::uint32_t x = b;; x = ipdom[x]) {
    if (x == a) return true;
    if (ipdom[x] == x) return false;
  }
}

PostDominators postdominators(const Cfg& cfg) {
  const std::uint32_t n = static_cast<std::uint32_t>(cfg.num_blocks());
  const std::uint32_t exit = n;
  // Reverse-graph successor lists (i.e. forward successors) with exit edges.
  std::vector<std::vector<std::uint32_t>> succ(n + 1);
  for (BlockId b = 0; b < n; ++b) {
    for (BlockId s : cfg.successors(b)) succ[b].push_back(s);
    if (succ[b].empty()) succ[b].push_back(exit);
  }
  PostDominators out;

  // Give every block a path to exit: repeatedly attach the highest-numbered
  // block that still cannot reach it.
  while (true) {
    std::vector<std::vector<std::uint32_t>> pred(n + 1);
    for (std::uint32_t b = 0; b < n; ++b)
      for (auto s : succ[b]) pred[s].push_back(b);
    std::vector<char> reach(n + 1, 0);
    std::vector<std::uint32_t> stack{exit};
    reach[exit] = 1;
    while (!stack.empty()) {
      auto x = stack.back();
      stack.pop_back();
      for (auto y : pred[x])
        if (!reach[y]) {
          reach[y] = 1;
          stack.push_back(y);
        }
    }
    std::optional<std::uint32_t> stuck;
    for (std::uint32_t b = 0; b < n; ++b)
      if (!reach[b]) stuck = b;
    if (!stuck) break;
    succ[*stuck].push_back(exit);
    out.virtual_exit_edges.push_back(*stuck);
  }

  // Iterative postdominator sets.
  std::vector<boost::dynamic_bitset<>> pdom(n + 1, boost::dynamic_bitset<>(n + 1));
  for (std::uint32_t b = 0; b < n; ++b) pdom[b].set();
  pdom[exit].set(exit);
  for (bool changed = true; changed;) {
    changed = false;
    for (std::uint32_t b = n; b-- > 0;) {
      boost::dynamic_bitset<> next(n + 1);
      next.set();
      for (auto s : succ[b]) next &= pdom[s];
      next.set(b);
      if (next != pdom[b]) {
        pdom[b] = std::move(next);
        changed = true;
      }
    }
  }
  // The immediate postdominator is the strict postdominator with the
  // largest postdominator set.
  out.ipdom.assign(n + 1, exit);
  for (std::uint32_t b = 0; b < n; ++b) {
    std::size_t best = 0;
    for (auto d = pdom[b].find_first(); d != boost::dynamic_bitset<>::npos; d = pdom[b].find_next(d)) {
      if (d == b) continue;
      if (pdom[d].count() > best) {
        best = pdom[d].count();
        out.ipdom[b] = static_cast<std::uint32_t>(d);
      }
    }
  }
  return out;
}

bool Cdg::depends_on(InstId inst, InstId branch) const {
  const auto& c = controllers_.at(inst);
  return std::binary_search(c.begin(), c.end(), branch);
}

Cdg control_dependence(const Cfg& cfg) {
  const Program& p = cfg.program();
  const PostDominators pd = postdominators(cfg);
  Cdg cdg;
  cdg.deps_.resize(p.size());
  cdg.controllers_.resize(p.size());
  for (BlockId b : pd.virtual_exit_edges)
    cdg.warnings_.push_back("block '" + p.block(b).label +
                            "' cannot reach a halt; virtual exit edge added");

  for (BlockId a = 0; a < cfg.num_blocks(); ++a) {
    const InstId term = p.block(a).instructions.back();
    if (p.instruction(term).opcode != Opcode::branch) continue;
    std::vector<char> marked(cfg.num_blocks(), 0);
    for (BlockId s : cfg.successors(a)) {
      for (std::uint32_t y = s; y != pd.ipdom[a] && y < cfg.num_blocks(); y = pd.ipdom[y]) {
        if (marked[y]) continue;
        marked[y] = 1;
      }
    }
    for (BlockId y = 0; y < cfg.num_blocks(); ++y) {
      if (!marked[y]) continue;
      for (InstId i : p.block(y).instructions) {
        cdg.deps_[term].push_back(i);
        cdg.controllers_[i].push_back(term);
      }
    }
  }
  for (auto& c : cdg.controllers_) std::sort(c.begin(), c.end());
  return cdg;
}

std::vector<std::uint64_t> distances_from(const Cfg& cfg, InstId a, bool fence_cut) {
  const Program& p = cfg.program();
  std::vector<std::uint64_t> dist(p.size(), kInfinity);
  dist[a] = 0;
  auto is_fence = [&](InstId i) { return fence_cut && p.instruction(i).opcode == Opcode::fence; };

  // arrive[b]: instructions executed when control reaches the start of b.
  std::vector<std::uint64_t> arrive(cfg.num_blocks(), kInfinity);
  using Item = std::pair<std::uint64_t, BlockId>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
  auto relax = [&](BlockId b, std::uint64_t d) {
    if (d < arrive[b]) {
      arrive[b] = d;
      queue.emplace(d, b);
    }
  };

  const Instruction& src = p.instruction(a);
  const auto& home = p.block(src.block).instructions;
  const std::size_t pos = static_cast<std::size_t>(a - home.front());
  bool open = true;
  for (std::size_t k = pos + 1; k < home.size(); ++k) {
    dist[home[k]] = std::min(dist[home[k]], static_cast<std::uint64_t>(k - pos));
    if (is_fence(home[k])) {
      open = false;
      break;
    }
  }
  if (open)
    for (BlockId s : cfg.successors(src.block)) relax(s, home.size() - 1 - pos);

  while (!queue.empty()) {
    auto [d, b] = queue.top();
    queue.pop();
    if (d != arrive[b]) continue;
    const auto& body = p.block(b).instructions;
    bool through = true;
    for (std::size_t k = 0; k < body.size(); ++k) {
      dist[body[k]] = std::min(dist[body[k]], d + k + 1);
      if (is_fence(body[k])) {
        through = false;
        break;
      }
    }
    if (through)
      for (BlockId s : cfg.successors(b)) relax(s, d + body.size());
  }
  dist[a] = 0;
  return dist;
}

std::uint64_t instruction_distance(const Cfg& cfg, InstId a, InstId b, bool fence_cut) {
  return distances_from(cfg, a, fence_cut).at(b);
}

}  // namespace specguard
