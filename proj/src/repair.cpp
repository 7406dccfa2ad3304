#include "specguard/repair.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

namespace specguard {

PatchPlan plan_fences(const std::vector<Detection>& dets) {
  std::map<InstId, std::vector<std::size_t>> anchors;
  for (std::size_t k = 0; k < dets.size(); ++k) anchors[dets[k].anchor()].push_back(k);
  PatchPlan plan;
  for (auto& [anchor, reasons] : anchors) plan.patches.push_back({anchor, std::move(reasons)});
  return plan;
}

Program apply_fences(const Program& p, const PatchPlan& plan) {
  std::vector<char> before(p.size(), 0);
  for (const Patch& patch : plan.patches) {
    if (patch.anchor >= p.size())
      throw std::invalid_argument("fence anchor instruction " + std::to_string(patch.anchor) +
                                  " does not exist");
    before[patch.anchor] = 1;
  }
  ProgramBuilder b = ProgramBuilder::with_header_of(p);
  for (const Block& block : p.blocks()) {
    b.add_block(block.label);
    for (InstId i : block.instructions) {
      if (before[i]) {
        Instruction fence;
        fence.opcode = plan.fence;
        b.append(std::move(fence));
      }
      b.append(p.instruction(i));
    }
  }
  return std::move(b).finish();
}

}  // namespace specguard
