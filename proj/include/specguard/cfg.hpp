// Control-flow graph, control dependence and instruction distances.
#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "specguard/ir.hpp"

namespace specguard {

enum class EdgeKind { taken, fallthrough, jump };

struct Edge {
  BlockId src = 0;
  BlockId dst = 0;
  EdgeKind kind = EdgeKind::jump;
  friend bool operator==(const Edge&, const Edge&) = default;
};

/// Block-level CFG.  External calls do not split blocks, so there are no
/// call or return edges.  Block 0 is the entry.
class Cfg {
 public:
  explicit Cfg(std::shared_ptr<const Program> program);

  const Program& program() const { return *program_; }
  const std::shared_ptr<const Program>& program_ptr() const { return program_; }

  std::size_t num_blocks() const { return succ_.size(); }
  BlockId entry() const { return 0; }
  const std::vector<Edge>& edges() const { return edges_; }
  /// Distinct successor blocks in edge order.
  const std::vector<BlockId>& successors(BlockId b) const { return succ_.at(b); }
  const std::vector<BlockId>& predecessors(BlockId b) const { return pred_.at(b); }
  /// Instructions that may execute right after `i`.
  std::vector<InstId> next_instructions(InstId i) const;
  const std::vector<std::string>& warnings() const { return warnings_; }

 private:
  std::shared_ptr<const Program> program_;
  std::vector<Edge> edges_;
  std::vector<std::vector<BlockId>> succ_;
  std::vector<std::vector<BlockId>> pred_;
  std::vector<std::string> warnings_;
};

Cfg build_cfg(std::shared_ptr<const Program> p);
Cfg build_cfg(Program p);

/// Control dependence at instruction granularity.  Only conditional
/// branches own non-empty sets.
class Cdg {
 public:
  /// Instructions control-dependent on `branch` (sorted).
  const std::vector<InstId>& dependents(InstId branch) const { return deps_.at(branch); }
  /// Branches that `inst` is control-dependent on (sorted).
  const std::vector<InstId>& controllers(InstId inst) const { return controllers_.at(inst); }
  bool depends_on(InstId inst, InstId branch) const;
  const std::vector<std::string>& warnings() const { return warnings_; }

 private:
  friend Cdg control_dependence(const Cfg& cfg);
  std::vector<std::vector<InstId>> deps_;
  std::vector<std::vector<InstId>> controllers_;
  std::vector<std::string> warnings_;
};

/// Immediate postdominators over blocks plus a virtual exit with index
/// num_blocks().  Blocks that cannot reach an exit get a virtual exit edge.
struct PostDominators {
  std::vector<std::uint32_t> ipdom;  // ipdom[exit] == exit
  std::vector<BlockId> virtual_exit_edges;
  bool postdominates(std::uint32_t a, std::uint32_t b) const;  // reflexive
};

PostDominators postdominators(const Cfg& cfg);
Cdg control_dependence(const Cfg& cfg);

inline constexpr std::uint64_t kInfinity = std::numeric_limits<std::uint64_t>::max();

/// Distance from `a` to every instruction: number of instructions executed
/// after `a` up to and including the target, over both branch directions.
/// With `fence_cut`, paths may not pass through a fence strictly between
/// the endpoints.  Entry `a` is 0.
std::vector<std::uint64_t> distances_from(const Cfg& cfg, InstId a, bool fence_cut = false);

std::uint64_t instruction_distance(const Cfg& cfg, InstId a, InstId b, bool fence_cut = false);

}  // namespace specguard
