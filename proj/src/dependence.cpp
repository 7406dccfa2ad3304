#include "specguard/dependence.hpp"

#include <algorithm>
#include <bit>
#include <deque>
#include <set>
#include <sstream>

#include <boost/dynamic_bitset.hpp>

namespace specguard {

namespace {

using u128 = unsigned __int128;

/// Smallest 2^k - 1 that is >= x.
std::uint64_t low_mask(std::uint64_t x) {
  if (x == 0) return 0;
  const int width = std::bit_width(x);
  return width >= 64 ? AbsValue::kMax : (std::uint64_t{1} << width) - 1;
}

std::string hex(std::uint64_t v) {
  std::ostringstream os;
  os << "0x" << std::hex << v;
  return os.str();
}

AbsValue operand_value(const Operand& op, const std::vector<AbsValue>& regs) {
  if (const auto* r = std::get_if<Register>(&op)) return regs.at(r->id);
  if (const auto* i = std::get_if<Immediate>(&op)) return AbsValue::exact(i->value);
  return AbsValue::top();
}

void transfer(const Instruction& inst, std::vector<AbsValue>& regs) {
  if (!inst.dest) return;
  AbsValue v = AbsValue::top();
  switch (inst.opcode) {
    case Opcode::binop:
      v = abstract_binary(inst.binary, operand_value(inst.operands[0], regs),
                          operand_value(inst.operands[1], regs));
      break;
    case Opcode::unop:
      v = abstract_unary(inst.unary, operand_value(inst.operands[0], regs));
      break;
    case Opcode::load:
      v = inst.width >= 8 ? AbsValue::top()
                          : AbsValue::range(0, (std::uint64_t{1} << (8 * inst.width)) - 1);
      break;
    default:
      break;
  }
  regs[*inst.dest] = v;
}

}  // namespace

AbsValue AbsValue::join(const AbsValue& o) const {
  if (bottom_) return o;
  if (o.bottom_) return *this;
  return {std::min(lo_, o.lo_), std::max(hi_, o.hi_)};
}

bool AbsValue::leq(const AbsValue& o) const {
  if (bottom_) return true;
  return !o.bottom_ && o.lo_ <= lo_ && hi_ <= o.hi_;
}

std::string AbsValue::str() const {
  if (bottom_) return "bottom";
  if (is_top()) return "top";
  if (is_exact()) return hex(lo_);
  return "[" + hex(lo_) + ", " + hex(hi_) + "]";
}

AbsValue abstract_binary(BinaryOp op, const AbsValue& a, const AbsValue& b) {
  if (a.is_bottom() || b.is_bottom()) return AbsValue::bottom();
  if (a.is_exact() && b.is_exact()) return AbsValue::exact(evaluate(op, a.lo(), b.lo()));
  switch (op) {
    case BinaryOp::add:
      if (a.hi() > AbsValue::kMax - b.hi()) return AbsValue::top();
      return AbsValue::range(a.lo() + b.lo(), a.hi() + b.hi());
    case BinaryOp::sub:
      if (a.lo() < b.hi()) return AbsValue::top();
      return AbsValue::range(a.lo() - b.hi(), a.hi() - b.lo());
    case BinaryOp::mul: {
      const u128 hi = static_cast<u128>(a.hi()) * b.hi();
      if (hi > AbsValue::kMax) return AbsValue::top();
      return AbsValue::range(a.lo() * b.lo(), static_cast<std::uint64_t>(hi));
    }
    case BinaryOp::and_:
      return AbsValue::range(0, std::min(a.hi(), b.hi()));
    case BinaryOp::or_:
      return AbsValue::range(std::max(a.lo(), b.lo()), low_mask(std::max(a.hi(), b.hi())));
    case BinaryOp::xor_:
      return AbsValue::range(0, low_mask(std::max(a.hi(), b.hi())));
    case BinaryOp::shl: {
      if (a == AbsValue::exact(0)) return a;
      if (!b.is_exact()) return AbsValue::top();
      const unsigned s = b.lo() & 63;
      if (a.hi() > (AbsValue::kMax >> s)) return AbsValue::top();
      return AbsValue::range(a.lo() << s, a.hi() << s);
    }
    case BinaryOp::shr: {
      if (!b.is_exact()) return AbsValue::range(0, a.hi());
      const unsigned s = b.lo() & 63;
      return AbsValue::range(a.lo() >> s, a.hi() >> s);
    }
    default:
      return AbsValue::range(0, 1);
  }
}

AbsValue abstract_unary(UnaryOp op, const AbsValue& a) {
  if (a.is_bottom()) return a;
  switch (op) {
    case UnaryOp::mov: return a;
    case UnaryOp::neg:
      return a.is_exact() ? AbsValue::exact(evaluate(op, a.lo())) : AbsValue::top();
    case UnaryOp::not_: return AbsValue::range(~a.hi(), ~a.lo());
  }
  return AbsValue::top();
}

AbsValue AbstractLoc::bytes() const {
  if (offset.is_bottom() || offset.is_top()) return offset;
  if (offset.hi() > AbsValue::kMax - (width - 1u)) return AbsValue::top();
  return AbsValue::range(offset.lo(), offset.hi() + width - 1u);
}

std::string AbstractLoc::str() const { return region + "+" + offset.str(); }

bool may_alias(const AbstractLoc& a, const AbstractLoc& b) {
  if (a.offset.is_bottom() || b.offset.is_bottom()) return false;
  if (a.is_anywhere() || b.is_anywhere()) return true;
  return a.region == b.region && a.bytes().intersects(b.bytes());
}

ValueSet value_set_analysis(const Cfg& cfg) {
  const Program& p = cfg.program();
  const std::size_t nregs = p.registers().size();
  const std::size_t nblocks = cfg.num_blocks();
  ValueSet vs;
  vs.program_ = cfg.program_ptr();

  std::vector<std::vector<AbsValue>> entry(nblocks, std::vector<AbsValue>(nregs));
  entry[cfg.entry()].assign(nregs, AbsValue::exact(0));
  std::vector<int> visits(nblocks, 0);
  std::vector<char> widened(nblocks, 0);
  std::set<BlockId> work{cfg.entry()};

  while (!work.empty()) {
    const BlockId b = *work.begin();
    work.erase(work.begin());
    std::vector<AbsValue> regs = entry[b];
    for (InstId i : p.block(b).instructions) transfer(p.instruction(i), regs);
    for (BlockId s : cfg.successors(b)) {
      auto& cur = entry[s];
      bool changed = false;
      const bool widen = ++visits[s] > kWideningThreshold;
      for (std::size_t r = 0; r < nregs; ++r) {
        AbsValue next = cur[r].join(regs[r]);
        if (next == cur[r]) continue;
        if (widen && !cur[r].is_bottom()) {
          next = AbsValue::range(next.lo() < cur[r].lo() ? 0 : cur[r].lo(),
                                 next.hi() > cur[r].hi() ? AbsValue::kMax : cur[r].hi());
          widened[s] = 1;
        }
        cur[r] = next;
        changed = true;
        ++vs.join_steps_;
      }
      if (changed) work.insert(s);
    }
  }

  vs.in_.assign(p.size(), std::vector<AbsValue>(nregs));
  for (BlockId b = 0; b < nblocks; ++b) {
    if (widened[b])
      vs.warnings_.push_back("register intervals widened at block '" + p.block(b).label + "'");
    std::vector<AbsValue> regs = entry[b];
    for (InstId i : p.block(b).instructions) {
      vs.in_[i] = regs;
      transfer(p.instruction(i), regs);
    }
  }
  return vs;
}

AbstractLoc resolve_addr(const ValueSet& vs, InstId inst, bool* escaped) {
  const Program& p = vs.program();
  const Instruction& in = p.instruction(inst);
  const MemRef& m = *in.memref();
  AbstractLoc loc{m.region.empty() ? std::string(kUnknownRegion) : m.region, AbsValue::top(),
                  in.width};
  if (escaped) *escaped = false;

  const AbsValue idx = m.index ? vs.at(inst, *m.index) : AbsValue::exact(0);
  if (idx.is_bottom()) {
    loc.offset = AbsValue::bottom();
    return loc;
  }
  auto anywhere = [&] {
    if (escaped) *escaped = true;
    loc.offset = AbsValue::top();
    return loc;
  };
  const u128 scaled_hi = static_cast<u128>(idx.hi()) * m.scale;
  if (scaled_hi > AbsValue::kMax) return anywhere();
  std::uint64_t lo = idx.lo() * m.scale;
  std::uint64_t hi = static_cast<std::uint64_t>(scaled_hi);
  if (m.offset >= 0) {
    const auto off = static_cast<std::uint64_t>(m.offset);
    if (hi > AbsValue::kMax - off) return anywhere();
    lo += off;
    hi += off;
  } else {
    const std::uint64_t off = ~static_cast<std::uint64_t>(m.offset) + 1;
    if (lo < off) return anywhere();
    lo -= off;
    hi -= off;
  }
  const std::uint64_t last = hi + (in.width - 1u);
  if (last < hi) return anywhere();

  if (!m.region.empty()) {
    const Region* r = p.find_region(m.region);
    if (last >= r->size) return anywhere();
    loc.offset = AbsValue::range(lo, hi);
    return loc;
  }
  const Region* r = p.region_at(lo);
  if (!r || !r->contains(last)) return anywhere();
  loc.region = r->name;
  loc.offset = AbsValue::range(lo - r->base, hi - r->base);
  return loc;
}

std::optional<RegId> DefUse::defined_register(InstId inst) const {
  return program().instruction(inst).dest;
}

DefUse reaching_definitions(const Cfg& cfg) {
  return reaching_definitions(cfg, std::make_shared<const ValueSet>(value_set_analysis(cfg)));
}

DefUse reaching_definitions(const Cfg& cfg, std::shared_ptr<const ValueSet> vs) {
  const Program& p = cfg.program();
  const std::size_t n = p.size();
  DefUse du;
  du.vs_ = std::move(vs);
  du.uses_.resize(n);
  du.mem_defs_.resize(n);
  du.locs_.resize(n);
  du.users_.resize(n);

  using Bits = boost::dynamic_bitset<>;
  std::vector<Bits> defs_of(p.registers().size(), Bits(n));
  Bits stores(n);
  for (const auto& inst : p.instructions()) {
    if (inst.dest) defs_of[*inst.dest].set(inst.id);
    if (inst.opcode == Opcode::store) stores.set(inst.id);
    if (inst.is_memory()) {
      bool escaped = false;
      du.locs_[inst.id] = resolve_addr(*du.vs_, inst.id, &escaped);
      if (escaped)
        du.warnings_.push_back("address of instruction " + std::to_string(inst.id) +
                               " escapes its region; treated as any location");
    }
  }

  // Register definitions are killed by redefinition; stores never are.
  auto step = [&](const Instruction& inst, Bits& set) {
    if (inst.dest) {
      set -= defs_of[*inst.dest];
      set.set(inst.id);
    } else if (inst.opcode == Opcode::store) {
      set.set(inst.id);
    }
  };

  const std::size_t nblocks = cfg.num_blocks();
  std::vector<Bits> in(nblocks, Bits(n));
  std::set<BlockId> work;
  for (BlockId b = 0; b < nblocks; ++b) work.insert(b);
  while (!work.empty()) {
    const BlockId b = *work.begin();
    work.erase(work.begin());
    Bits out = in[b];
    for (InstId i : p.block(b).instructions) step(p.instruction(i), out);
    for (BlockId s : cfg.successors(b)) {
      Bits next = in[s] | out;
      if (next != in[s]) {
        in[s] = std::move(next);
        work.insert(s);
      }
    }
  }

  for (BlockId b = 0; b < nblocks; ++b) {
    Bits cur = in[b];
    for (InstId i : p.block(b).instructions) {
      const Instruction& inst = p.instruction(i);
      for (RegId r : inst.used_registers()) {
        RegisterUse use{r, {}};
        const Bits reaching = cur & defs_of[r];
        for (auto d = reaching.find_first(); d != Bits::npos; d = reaching.find_next(d))
          use.defs.push_back(static_cast<InstId>(d));
        for (InstId d : use.defs) du.users_[d].push_back(i);
        du.uses_[i].push_back(std::move(use));
      }
      if (inst.opcode == Opcode::load) {
        const Bits reaching = cur & stores;
        for (auto s = reaching.find_first(); s != Bits::npos; s = reaching.find_next(s)) {
          if (!may_alias(*du.locs_[s], *du.locs_[i])) continue;
          du.mem_defs_[i].push_back(static_cast<InstId>(s));
          du.users_[s].push_back(i);
        }
      }
      step(inst, cur);
    }
  }
  for (auto& u : du.users_) {
    std::sort(u.begin(), u.end());
    u.erase(std::unique(u.begin(), u.end()), u.end());
  }
  return du;
}

DepClosure::DepClosure(const DefUse& du, InstId src)
    : du_(&du), src_(src), member_(du.program().size(), 0), value_store_(du.program().size(), 0) {
  const Program& p = du.program();
  if (p.instruction(src).opcode == Opcode::store) value_store_[src] = 1;
  std::deque<InstId> queue{src};
  while (!queue.empty()) {
    const InstId d = queue.front();
    queue.pop_front();
    for (InstId j : du.users(d)) {
      const Instruction& inst = p.instruction(j);
      bool member = false;
      bool value = false;
      for (const RegisterUse& use : du.uses(j)) {
        if (!std::binary_search(use.defs.begin(), use.defs.end(), d)) continue;
        member = true;
        if (inst.opcode == Opcode::store) {
          const auto* v = std::get_if<Register>(&inst.operands.at(1));
          if (v && v->id == use.reg) value = true;
        }
      }
      const auto& mdefs = du.memory_defs(j);
      if (value_store_[d] && std::binary_search(mdefs.begin(), mdefs.end(), d)) member = true;
      bool changed = false;
      if (member && !member_[j]) member_[j] = 1, changed = true;
      if (value && !value_store_[j]) value_store_[j] = 1, changed = true;
      if (changed) queue.push_back(j);
    }
  }
}

bool DepClosure::register_dependent(InstId inst, RegId reg) const {
  for (const RegisterUse& use : du_->uses(inst)) {
    if (use.reg != reg) continue;
    for (InstId d : use.defs)
      if (d == src_ || member_[d]) return true;
  }
  return false;
}

bool DepClosure::depends(const Entity& x) const {
  return std::visit(
      [&](const auto& e) -> bool {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, InstructionRef>) {
          return e.id < member_.size() && member_[e.id];
        } else if constexpr (std::is_same_v<T, RegisterAt>) {
          return e.inst < member_.size() && register_dependent(e.inst, e.reg);
        } else if constexpr (std::is_same_v<T, AddressOf>) {
          if (e.inst >= member_.size()) return false;
          const auto idx = du_->program().instruction(e.inst).address_register();
          return idx && register_dependent(e.inst, *idx);
        } else {
          for (InstId s = 0; s < value_store_.size(); ++s)
            if (value_store_[s] && may_alias(*du_->location(s), e)) return true;
          return false;
        }
      },
      x);
}

bool dep(const DefUse& du, InstId src, const Entity& x) { return DepClosure(du, src).depends(x); }

}  // namespace specguard
