// Value-set analysis, abstract memory locations, reaching definitions and
// the data-dependence predicate.
#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "specguard/cfg.hpp"

namespace specguard {

/// Unsigned 64-bit interval.  Exact values have lo == hi; top is the full
/// range.  A default-constructed value is bottom (no value).
class AbsValue {
 public:
  static constexpr std::uint64_t kMax = std::numeric_limits<std::uint64_t>::max();

  AbsValue() = default;
  static AbsValue exact(std::uint64_t v) { return {v, v}; }
  static AbsValue range(std::uint64_t lo, std::uint64_t hi) { return {lo, hi}; }
  static AbsValue top() { return {0, kMax}; }
  static AbsValue bottom() { return {}; }

  bool is_bottom() const { return bottom_; }
  bool is_exact() const { return !bottom_ && lo_ == hi_; }
  bool is_top() const { return !bottom_ && lo_ == 0 && hi_ == kMax; }
  std::uint64_t lo() const { return lo_; }
  std::uint64_t hi() const { return hi_; }

  bool contains(std::uint64_t v) const { return !bottom_ && lo_ <= v && v <= hi_; }
  bool intersects(const AbsValue& o) const {
    return !bottom_ && !o.bottom_ && lo_ <= o.hi_ && o.lo_ <= hi_;
  }
  /// Smallest interval covering both.
  AbsValue join(const AbsValue& o) const;
  /// this ⊑ o
  bool leq(const AbsValue& o) const;

  std::string str() const;
  friend bool operator==(const AbsValue&, const AbsValue&) = default;

 private:
  AbsValue(std::uint64_t lo, std::uint64_t hi) : lo_(lo), hi_(hi), bottom_(false) {}
  std::uint64_t lo_ = 0;
  std::uint64_t hi_ = 0;
  bool bottom_ = true;
};

AbsValue abstract_binary(BinaryOp op, const AbsValue& a, const AbsValue& b);
AbsValue abstract_unary(UnaryOp op, const AbsValue& a);

inline constexpr std::string_view kUnknownRegion = "unknown";

/// Summary of the bytes touched by one memory access.  A top offset means
/// the access may land anywhere: the index escaped every declared bound.
struct AbstractLoc {
  std::string region;  // kUnknownRegion when no single region holds it
  AbsValue offset;     // of the first byte, relative to the region base
  std::uint8_t width = 1;

  bool is_unknown() const { return region == kUnknownRegion; }
  bool is_anywhere() const { return is_unknown() || offset.is_top(); }
  /// Byte range [offset.lo, offset.hi + width - 1] within the region.
  AbsValue bytes() const;
  std::string str() const;
  friend bool operator==(const AbstractLoc&, const AbstractLoc&) = default;
};

/// Same region with intersecting byte ranges, or either side may be anywhere.
bool may_alias(const AbstractLoc& a, const AbstractLoc& b);

/// Register summaries before each instruction executes.
class ValueSet {
 public:
  const Program& program() const { return *program_; }
  const AbsValue& at(InstId inst, RegId reg) const { return in_.at(inst).at(reg); }
  const std::vector<std::string>& warnings() const { return warnings_; }
  /// Register-level joins that changed a block entry state.
  std::size_t join_steps() const { return join_steps_; }

 private:
  friend ValueSet value_set_analysis(const Cfg& cfg);
  std::shared_ptr<const Program> program_;
  std::vector<std::vector<AbsValue>> in_;
  std::vector<std::string> warnings_;
  std::size_t join_steps_ = 0;
};

/// Visits to one block entry before its intervals are widened.
inline constexpr int kWideningThreshold = 4;

ValueSet value_set_analysis(const Cfg& cfg);

/// Region and offset summary of the access performed by a load or store.
/// `escaped` is set when a bounded offset had to be widened because it left
/// its region.
AbstractLoc resolve_addr(const ValueSet& vs, InstId inst, bool* escaped = nullptr);

struct RegisterUse {
  RegId reg = 0;
  std::vector<InstId> defs;  // sorted; empty means the initial zero value
};

/// Register and memory def-use chains.
class DefUse {
 public:
  const Program& program() const { return vs_->program(); }
  const ValueSet& values() const { return *vs_; }
  const std::shared_ptr<const ValueSet>& values_ptr() const { return vs_; }

  /// Register defined by `inst`, if any.
  std::optional<RegId> defined_register(InstId inst) const;
  const std::vector<RegisterUse>& uses(InstId inst) const { return uses_.at(inst); }
  /// Stores that may reach load `inst` and write an aliasing location.
  const std::vector<InstId>& memory_defs(InstId inst) const { return mem_defs_.at(inst); }
  /// Resolved location of a load or store; nullopt for other opcodes.
  const std::optional<AbstractLoc>& location(InstId inst) const { return locs_.at(inst); }
  /// Instructions that read a value defined by `inst` (register or memory).
  const std::vector<InstId>& users(InstId inst) const { return users_.at(inst); }
  const std::vector<std::string>& warnings() const { return warnings_; }

 private:
  friend DefUse reaching_definitions(const Cfg& cfg, std::shared_ptr<const ValueSet> vs);
  std::shared_ptr<const ValueSet> vs_;
  std::vector<std::vector<RegisterUse>> uses_;
  std::vector<std::vector<InstId>> mem_defs_;
  std::vector<std::optional<AbstractLoc>> locs_;
  std::vector<std::vector<InstId>> users_;
  std::vector<std::string> warnings_;
};

DefUse reaching_definitions(const Cfg& cfg, std::shared_ptr<const ValueSet> vs);
DefUse reaching_definitions(const Cfg& cfg);

/// Value produced by an instruction.
struct InstructionRef {
  InstId id = 0;
};
/// Register `reg` as read by instruction `inst`.
struct RegisterAt {
  InstId inst = 0;
  RegId reg = 0;
};
/// Address operand of a load or store.
struct AddressOf {
  InstId inst = 0;
};
using Entity = std::variant<InstructionRef, RegisterAt, AddressOf, AbstractLoc>;

/// Forward data-dependence closure of one instruction's definition.  Flow
/// through memory follows stores whose stored value is dependent.
class DepClosure {
 public:
  DepClosure(const DefUse& du, InstId src);

  InstId source() const { return src_; }
  bool contains(InstId inst) const { return member_.at(inst) != 0; }
  bool depends(const Entity& x) const;

 private:
  bool register_dependent(InstId inst, RegId reg) const;
  const DefUse* du_;
  InstId src_;
  std::vector<char> member_;
  std::vector<char> value_store_;
};

/// Dep(src, x).  Builds a closure per call; use DepClosure for many queries.
bool dep(const DefUse& du, InstId src, const Entity& x);

}  // namespace specguard
