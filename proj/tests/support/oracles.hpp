// Brute-force reference implementations used as test oracles.  They work
// directly on the Program, never on the analyses they check.
#pragma once

#include <cstdint>
#include <vector>

#include "specguard/ir.hpp"

namespace specguard::testing {

inline constexpr std::uint64_t kUnreachable = ~std::uint64_t{0};

/// Instructions that may execute right after `i`.
std::vector<InstId> successors_of(const Program& p, InstId i);

/// Shortest path length from a to b by BFS; with `fence_cut` no fence may
/// sit strictly inside the path.
std::uint64_t bfs_distance(const Program& p, InstId a, InstId b, bool fence_cut);

/// Definitions (instruction ids) of `reg` that reach the point just before
/// `use` along some path with no intervening redefinition.
std::vector<InstId> reaching_register_defs(const Program& p, InstId use, RegId reg);

/// True when `inst` is control-dependent on conditional `branch`: some
/// successor path is forced through `inst` and another can avoid it.
/// Requires every instruction to reach a halt.
bool control_dependent(const Program& p, InstId inst, InstId branch);

/// Cache set of an absolute address.
std::uint64_t set_index(std::uint64_t address, std::uint64_t line_size, std::uint64_t num_sets);

}  // namespace specguard::testing

#include <string>

#include "specguard/simulator.hpp"
#include "specguard/taint.hpp"

namespace specguard::testing {

/// Flips each source byte of `input` in turn (xor 0xff) and runs both
/// inputs without misprediction.  Every committed result, branch outcome
/// or final memory byte that differs must be covered by `ts`.  Returns one
/// message per uncovered difference.
std::vector<std::string> taint_oracle_violations(const Program& p, const TaintState& ts,
                                                 const SimInput& input);

}  // namespace specguard::testing
