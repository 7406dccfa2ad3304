// Concrete executor with a branch-misprediction model.  Transient episodes
// run on a register snapshot and a store overlay, then are squashed; only
// their cache-line touches remain in the trace.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "specguard/meltdown.hpp"
#include "specguard/spectre.hpp"

namespace specguard {

enum class BranchDirection { taken, fallthrough, wrong };

/// Which branches mispredict.  `per_site` predicts the listed direction at
/// each listed branch (`wrong` always mispredicts) and predicts correctly
/// everywhere else.
struct MispredictPolicy {
  enum class Mode { never, always, per_site };
  Mode mode = Mode::never;
  std::map<InstId, BranchDirection> sites;

  static MispredictPolicy never() { return {}; }
  static MispredictPolicy always() { return {Mode::always, {}}; }
  static MispredictPolicy at(InstId branch, BranchDirection d = BranchDirection::wrong) {
    return {Mode::per_site, {{branch, d}}};
  }
  /// "all", "none", or comma-separated "SITE:taken|fallthrough|wrong".
  static MispredictPolicy parse(std::string_view text);
};

struct MemoryInit {
  std::string region;
  std::uint64_t offset = 0;
  std::vector<std::uint8_t> bytes;
};

/// Bytes returned by calls, per callee, plus initial memory contents.
struct SimInput {
  std::map<std::string, std::vector<std::uint8_t>> sources;
  std::vector<MemoryInit> memory;
};

/// Lines `NAME: hex bytes` feed calls to NAME; lines `@REGION+OFF: hex
/// bytes` preset memory.  `#` starts a comment.
SimInput parse_sim_input(std::string_view text);

struct SimOptions {
  MispredictPolicy policy;
  std::uint64_t sew = kDefaultSew;
  CacheGeometry geometry{64, 8, 64};
  int max_depth = 1;  // nested mispredictions allowed inside an episode
  std::uint64_t step_budget = 1'000'000;
};

enum class EventKind { commit, transient, fault };

std::string_view to_string(EventKind k);

struct Access {
  std::string region;  // empty outside every declared region
  std::uint64_t offset = 0;
  std::uint64_t line = 0;  // absolute address / line size
  bool write = false;
  friend bool operator==(const Access&, const Access&) = default;
};

struct TraceEvent {
  InstId inst = 0;
  EventKind kind = EventKind::commit;
  std::optional<Access> access;
  std::uint32_t depth = 0;  // 0 for committed execution
  std::optional<std::uint64_t> value;  // result, stored value, or branch outcome
  friend bool operator==(const TraceEvent&, const TraceEvent&) = default;
};

enum class TraceStatus { halted, faulted };

struct SpecTrace {
  std::uint64_t program_hash = 0;
  std::vector<TraceEvent> events;
  TraceStatus status = TraceStatus::halted;
  std::vector<std::uint64_t> registers;  // final committed values
  std::map<std::string, std::vector<std::uint8_t>> memory;  // final committed regions
  std::map<std::uint64_t, std::uint8_t> loose_memory;       // bytes outside regions
  friend bool operator==(const SpecTrace&, const SpecTrace&) = default;
};

class StepBudgetExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::uint64_t program_hash(const Program& p);

/// Deterministic for a given (program, input, options).  Throws
/// StepBudgetExceeded when the committed plus transient step count exceeds
/// the budget.
SpecTrace simulate(const Program& p, const SimInput& input, const SimOptions& opts);

/// Two runs that differ only in secret contents leak when their transient
/// line multisets differ and some transient access read `secret`.  Throws
/// std::invalid_argument for traces of different programs.
bool leaks_secret(const SpecTrace& a, const SpecTrace& b, std::string_view secret);

struct DiffConfig {
  std::vector<SimInput> inputs;
  std::string secret_region;
  std::vector<std::pair<std::vector<std::uint8_t>, std::vector<std::uint8_t>>> secret_pairs;
  std::uint64_t sew = kDefaultSew;
  CacheGeometry geometry{64, 8, 64};
};

struct Leak {
  InstId branch = 0;
  std::size_t input = 0;
  std::size_t pair = 0;
  friend bool operator==(const Leak&, const Leak&) = default;
};

struct DiffVerdict {
  bool pass = true;
  std::vector<InstId> trainable;  // branches whose outcome varies across inputs
  std::vector<Leak> leaks;
  std::vector<Leak> uncovered;    // leaks with no detection at that branch
  std::size_t runs = 0;
  std::size_t skipped = 0;        // secret read architecturally
};

/// Mispredicts each trainable branch in turn over every input and secret
/// pair.  FAIL when a leak has no detection anchored at its branch.
DiffVerdict differential_check(const Program& p, const std::vector<Detection>& dets,
                               const DiffConfig& config);

}  // namespace specguard
