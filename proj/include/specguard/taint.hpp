// Taint propagation over the IR in data-only and program-dependence modes.
#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "specguard/dependence.hpp"

namespace specguard {

enum class TaintMode { data_only, program_dep };

std::string_view to_string(TaintMode m);
std::optional<TaintMode> parse_taint_mode(std::string_view text);

/// Taint sources used when none are configured.
const std::vector<std::string>& default_taint_sources();

struct TaintConfig {
  std::vector<std::string> sources = default_taint_sources();
  TaintMode mode = TaintMode::program_dep;
};

/// Reads `sources = [a, b]` and `mode = data_only|program_dep` lines.
/// Unknown keys and malformed lines throw std::runtime_error.
TaintConfig parse_taint_config(std::string_view text);

enum class TaintRule {
  source,         // call to a configured source
  opaque_call,    // call to anything else; its result is unknown
  binary,         // binop reads a tainted register
  unary,          // unop reads a tainted register
  load_value,     // load from a location holding a tainted value
  load_address,   // load through a tainted address register
  store_value,    // store of a tainted value
  store_address,  // store through a tainted address register
  branch,         // branch on a tainted condition
  jump,           // indirect jump through a tainted register
  implicit,       // control-dependent on a tainted branch
};

std::string_view to_string(TaintRule r);

/// Why an instruction became tainted.  `parent` is the tainted instruction
/// the rule premise refers to; sources and opaque calls have none.
struct Witness {
  InstId inst = 0;
  TaintRule rule = TaintRule::source;
  std::optional<InstId> parent;
  friend bool operator==(const Witness&, const Witness&) = default;
};

/// A location whose value (or address) is tainted, and the access that did it.
struct TaintedLoc {
  AbstractLoc loc;
  InstId by = 0;
  friend bool operator==(const TaintedLoc&, const TaintedLoc&) = default;
};

class TaintState {
 public:
  TaintState() = default;
  explicit TaintState(std::size_t num_instructions);

  TaintMode mode() const { return mode_; }
  /// τ(inst)
  bool instruction(InstId inst) const { return inst < witness_.size() && witness_[inst].has_value(); }
  /// τ(reg) as read by `inst`.
  bool register_at(InstId inst, RegId reg) const;
  /// τ(addr(inst)): the address register of a load or store is tainted.
  bool address(InstId inst) const { return inst < address_.size() && address_[inst].has_value(); }
  /// Witness chain for τ(addr(inst)); empty when the address is untainted.
  std::vector<Witness> address_chain(InstId inst) const;
  /// τ(val(loc)): some tainted value may be stored at `loc`.
  bool value_at(const AbstractLoc& loc) const;
  /// `loc` may overlap an access made through a tainted address.
  bool address_location(const AbstractLoc& loc) const;

  const std::optional<Witness>& witness(InstId inst) const { return witness_.at(inst); }
  /// Witnesses from `inst` back to a source or opaque call.
  std::vector<Witness> chain(InstId inst) const;
  std::vector<InstId> tainted_instructions() const;
  const std::vector<TaintedLoc>& value_locations() const { return value_locs_; }
  const std::vector<TaintedLoc>& address_locations() const { return address_locs_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

  friend bool operator==(const TaintState& a, const TaintState& b) {
    return a.witness_ == b.witness_ && a.reads_ == b.reads_ && a.address_ == b.address_ &&
           a.value_locs_ == b.value_locs_ && a.address_locs_ == b.address_locs_;
  }

 private:
  friend TaintState seed_taints(const Program&, const Cfg&, const TaintConfig&);
  friend TaintState propagate(const Cfg&, const DefUse&, const Cdg&, const TaintState&, TaintMode);

  TaintMode mode_ = TaintMode::program_dep;
  std::vector<std::optional<Witness>> witness_;
  std::vector<std::vector<RegId>> reads_;  // tainted registers read, sorted
  std::vector<std::optional<InstId>> address_;  // tainted def of the address register
  std::vector<TaintedLoc> value_locs_;
  std::vector<TaintedLoc> address_locs_;
  std::vector<std::string> warnings_;
};

/// Taints the results of calls to configured sources and to names the
/// program header declares with `source`.
TaintState seed_taints(const Program& p, const Cfg& cfg, const TaintConfig& config);

/// Least fixpoint of the propagation rules starting from `seed`.  The
/// implicit rule is active only in program_dep mode.
TaintState propagate(const Cfg& cfg, const DefUse& du, const Cdg& cdg, const TaintState& seed,
                     TaintMode mode);

bool is_tainted(const TaintState& ts, InstId inst);
bool is_tainted(const TaintState& ts, const Entity& e);

}  // namespace specguard
