// Fence insertion for detected Spectre victims.
#pragma once

#include <cstddef>
#include <vector>

#include "specguard/spectre.hpp"

namespace specguard {

/// A fence placed immediately before `anchor`.  `reasons` index the
/// detections that asked for it.
struct Patch {
  InstId anchor = 0;
  std::vector<std::size_t> reasons;
  friend bool operator==(const Patch&, const Patch&) = default;
};

struct PatchPlan {
  std::vector<Patch> patches;  // sorted by anchor, one per anchor
  Opcode fence = Opcode::fence;
  bool empty() const { return patches.empty(); }
  friend bool operator==(const PatchPlan&, const PatchPlan&) = default;
};

/// One fence before each distinct RS or SW.
PatchPlan plan_fences(const std::vector<Detection>& dets);

/// Copy of `p` with the planned fences inserted; instruction ids are
/// renumbered in text order.  Throws std::invalid_argument for an anchor
/// that does not exist.
Program apply_fences(const Program& p, const PatchPlan& plan);

}  // namespace specguard
