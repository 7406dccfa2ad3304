// The textual RISC-like IR analyzed by specguard.
//
// A program is a header of region and source declarations followed by
// labeled basic blocks holding one instruction per line:
//
//   region array1 @0x1000 size 64
//   region secret @0x1040 size 64 protected
//   source read
//
//   entry:
//     call read -> x
//     c = lt x, 16
//     br c, body, done
//   body:
//     y = load.1 [array1 + x*1]
//     ...
//
// Programs are immutable once parsed; every analysis takes them by const
// reference or through a shared pointer held by the Cfg.
#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

namespace specguard {

using InstId = std::uint32_t;
using BlockId = std::uint32_t;
using RegId = std::uint32_t;

enum class Opcode { binop, unop, load, store, branch, jump, call, fence, time, halt };

enum class BinaryOp {
  add, sub, mul, and_, or_, xor_, shl, shr,
  eq, ne, lt, le, gt, ge, slt, sle, sgt, sge,
};

enum class UnaryOp { mov, neg, not_ };

std::string_view to_string(Opcode op);
std::string_view to_string(BinaryOp op);
std::string_view to_string(UnaryOp op);

struct Register {
  RegId id = 0;
  friend bool operator==(const Register&, const Register&) = default;
};

struct Immediate {
  std::uint64_t value = 0;
  friend bool operator==(const Immediate&, const Immediate&) = default;
};

/// Memory operand: region base + offset + index * scale.
///
/// When `region` is empty the operand is an absolute address; the index
/// register then usually carries a pointer and the region is recovered by
/// value-set analysis.
struct MemRef {
  std::string region;
  std::int64_t offset = 0;
  std::optional<RegId> index;
  std::uint64_t scale = 1;
  friend bool operator==(const MemRef&, const MemRef&) = default;
};

using Operand = std::variant<Register, Immediate, MemRef>;

struct Instruction {
  InstId id = 0;
  Opcode opcode = Opcode::halt;
  BlockId block = 0;
  std::optional<RegId> dest;
  // binop: two value operands; unop: one; load: memref; store: memref then
  // value; branch: condition register; indirect jump: target register.
  std::vector<Operand> operands;
  BinaryOp binary = BinaryOp::add;
  UnaryOp unary = UnaryOp::mov;
  std::uint8_t width = 8;  // bytes moved by load/store
  // branch: {taken, fallthrough}; jump: one target, or the annotated target
  // set of an indirect jump.
  std::vector<BlockId> targets;
  bool indirect = false;
  std::string callee;

  bool is_memory() const { return opcode == Opcode::load || opcode == Opcode::store; }
  bool is_terminator() const {
    return opcode == Opcode::branch || opcode == Opcode::jump || opcode == Opcode::halt;
  }
  const MemRef* memref() const;
  /// Registers read by this instruction (condition, operands, index, stored value).
  std::vector<RegId> used_registers() const;
  /// Index register of the memory operand, if any.
  std::optional<RegId> address_register() const;

  friend bool operator==(const Instruction&, const Instruction&) = default;
};

struct Region {
  std::string name;
  std::uint64_t base = 0;
  std::uint64_t size = 0;
  bool is_protected = false;
  bool readonly = false;

  bool contains(std::uint64_t address) const { return address >= base && address - base < size; }
  friend bool operator==(const Region&, const Region&) = default;
};

struct Block {
  std::string label;
  std::vector<InstId> instructions;
  friend bool operator==(const Block&, const Block&) = default;
};

/// Region names that model protected register classes.  Loads from them
/// stand for reads of system or floating-point registers.
inline constexpr std::string_view kSysRegRegion = "sysreg";
inline constexpr std::string_view kFpRegRegion = "fpreg";

class Program {
 public:
  const std::vector<Region>& regions() const { return regions_; }
  const std::vector<std::string>& sources() const { return sources_; }
  const std::vector<std::string>& registers() const { return registers_; }
  const std::vector<Block>& blocks() const { return blocks_; }
  const std::vector<Instruction>& instructions() const { return instructions_; }

  const Instruction& instruction(InstId id) const { return instructions_.at(id); }
  const Block& block(BlockId id) const { return blocks_.at(id); }
  std::size_t size() const { return instructions_.size(); }

  const Region* find_region(std::string_view name) const;
  /// Region whose [base, base+size) contains `address`.
  const Region* region_at(std::uint64_t address) const;
  std::optional<BlockId> find_block(std::string_view label) const;
  std::optional<RegId> find_register(std::string_view name) const;
  const std::string& register_name(RegId id) const { return registers_.at(id); }

  /// Region is protected, or is one of the protected register classes.
  bool is_sensitive(const Region& region) const;

  friend bool operator==(const Program& a, const Program& b) {
    return a.regions_ == b.regions_ && a.sources_ == b.sources_ && a.registers_ == b.registers_ &&
           a.blocks_ == b.blocks_ && a.instructions_ == b.instructions_;
  }

 private:
  friend class ProgramBuilder;
  friend Program parse_program(std::string_view text);

  std::vector<Region> regions_;
  std::vector<std::string> sources_;
  std::vector<std::string> registers_;
  std::vector<Block> blocks_;
  std::vector<Instruction> instructions_;
  std::unordered_map<std::string, RegId> register_index_;
};

/// Assembles a Program block by block.  Used by the parser and by passes
/// that rewrite programs (fence insertion).
class ProgramBuilder {
 public:
  ProgramBuilder() = default;
  /// Starts from the header and register table of an existing program.
  static ProgramBuilder with_header_of(const Program& p);

  void add_region(Region r);
  void add_source(std::string name);
  RegId intern_register(std::string_view name);
  BlockId add_block(std::string label);
  /// Appends to the current (last) block; id and block are assigned here.
  InstId append(Instruction inst);
  std::size_t block_count() const { return program_.blocks_.size(); }
  /// Program assembled so far.
  const Program& view() const { return program_; }
  /// Mutable access for late fix-ups such as forward label resolution.
  Instruction& instruction(InstId id) { return program_.instructions_.at(id); }

  Program finish() &&;

 private:
  Program program_;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, std::size_t column, const std::string& message);
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

/// Concrete semantics shared by the value analysis and the simulator.
/// Shift amounts use the low six bits; lt/le/gt/ge compare unsigned.
std::uint64_t evaluate(BinaryOp op, std::uint64_t a, std::uint64_t b);
std::uint64_t evaluate(UnaryOp op, std::uint64_t a);

/// Parses IR text.  Throws ParseError on syntax errors, duplicate labels,
/// unresolved labels, undeclared regions and overlapping regions.
Program parse_program(std::string_view text);

/// Canonical text: header first, then one instruction per line with a
/// two-space indent.  parse_program(print_program(p)) == p.
std::string print_program(const Program& p);
std::string print_instruction(const Program& p, const Instruction& inst);
std::string print_memref(const Program& p, const MemRef& m);

}  // namespace specguard
