#include "specguard/simulator.hpp"

#include <algorithm>
#include <charconv>
#include <functional>
#include <sstream>
#include <stdexcept>

namespace specguard {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::uint64_t parse_number(std::string_view s, int base = 10) {
  if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) {
    s.remove_prefix(2);
    base = 16;
  }
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v, base);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    throw std::invalid_argument("invalid number '" + std::string(s) + "'");
  return v;
}

std::vector<std::uint8_t> parse_bytes(std::string_view text) {
  std::string s(text);
  std::replace(s.begin(), s.end(), ',', ' ');
  std::istringstream in(s);
  std::vector<std::uint8_t> out;
  std::string tok;
  while (in >> tok) {
    const std::uint64_t v = parse_number(tok, 16);
    if (v > 0xff) throw std::invalid_argument("byte value out of range: " + tok);
    out.push_back(static_cast<std::uint8_t>(v));
  }
  return out;
}

}  // namespace

MispredictPolicy MispredictPolicy::parse(std::string_view text) {
  if (text == "all") return always();
  if (text == "none") return never();
  MispredictPolicy policy{Mode::per_site, {}};
  std::istringstream in{std::string(text)};
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    const auto colon = item.find(':');
    if (colon == std::string::npos)
      throw std::invalid_argument("mispredict site must be SITE:taken|fallthrough|wrong");
    const auto site = static_cast<InstId>(parse_number(item.substr(0, colon)));
    const std::string dir = item.substr(colon + 1);
    BranchDirection d;
    if (dir == "taken") d = BranchDirection::taken;
    else if (dir == "fallthrough") d = BranchDirection::fallthrough;
    else if (dir == "wrong") d = BranchDirection::wrong;
    else throw std::invalid_argument("unknown branch direction '" + dir + "'");
    policy.sites[site] = d;
  }
  return policy;
}

SimInput parse_sim_input(std::string_view text) {
  SimInput input;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto colon = line.find(':');
    if (colon == std::string::npos)
      throw std::invalid_argument("input line " + std::to_string(line_no) + ": expected NAME: bytes");
    std::string key = trim(std::string_view(line).substr(0, colon));
    auto bytes = parse_bytes(std::string_view(line).substr(colon + 1));
    if (!key.empty() && key.front() == '@') {
      MemoryInit init;
      const auto plus = key.find('+');
      init.region = trim(key.substr(1, plus == std::string::npos ? std::string::npos : plus - 1));
      if (plus != std::string::npos) init.offset = parse_number(trim(key.substr(plus + 1)));
      init.bytes = std::move(bytes);
      input.memory.push_back(std::move(init));
    } else {
      auto& dst = input.sources[key];
      dst.insert(dst.end(), bytes.begin(), bytes.end());
    }
  }
  return input;
}

std::string_view to_string(EventKind k) {
  switch (k) {
    case EventKind::commit: return "commit";
    case EventKind::transient: return "transient";
    case EventKind::fault: return "fault";
  }
  return "?";
}

std::uint64_t program_hash(const Program& p) { return std::hash<std::string>{}(print_program(p)); }

namespace {

using Overlay = std::map<std::uint64_t, std::uint8_t>;

class Machine {
 public:
  Machine(const Program& p, const SimInput& input, const SimOptions& opts)
      : p_(p), input_(input), opts_(opts), regs_(p.registers().size(), 0) {
    for (const auto& r : p.regions()) mem_.emplace_back(r.size, 0);
    for (const auto& init : input.memory) {
      const Region* r = p.find_region(init.region);
      if (!r) throw std::invalid_argument("input names undeclared region '" + init.region + "'");
      if (init.offset + init.bytes.size() > r->size)
        throw std::invalid_argument("input bytes overflow region '" + init.region + "'");
      const auto idx = static_cast<std::size_t>(r - p.regions().data());
      std::copy(init.bytes.begin(), init.bytes.end(), mem_[idx].begin() + init.offset);
    }
    trace_.program_hash = program_hash(p);
  }

  SpecTrace run() {
    InstId pc = p_.block(0).instructions.front();
    while (true) {
      tick();
      const Instruction& inst = p_.instruction(pc);
      if (inst.opcode == Opcode::load && protected_read(address(inst, regs_), inst.width)) {
        // The faulting read still forwards its value to dependent
        // instructions until the fault retires.
        const std::uint64_t addr = address(inst, regs_);
        const std::uint64_t v = read(addr, inst.width, nullptr);
        trace_.events.push_back({pc, EventKind::fault, describe(addr, false), 0, std::nullopt});
        auto regs = regs_;
        regs[*inst.dest] = v;
        Overlay ov;
        if (auto next = fallthrough(inst)) episode(*next, regs, ov, 1, opts_.sew);
        trace_.status = TraceStatus::faulted;
        break;
      }
      auto next = execute(inst, regs_, nullptr, EventKind::commit, 0);
      if (inst.opcode == Opcode::branch && opts_.max_depth >= 1) {
        const bool taken = regs_[reg_of(inst.operands[0])] != 0;
        if (mispredicts(inst.id, taken)) {
          auto regs = regs_;
          Overlay ov;
          episode(first_of(inst.targets[taken ? 1 : 0]), regs, ov, 1, opts_.sew);
        }
      }
      if (!next) break;
      pc = *next;
    }
    trace_.registers = regs_;
    for (std::size_t r = 0; r < mem_.size(); ++r) trace_.memory[p_.regions()[r].name] = mem_[r];
    trace_.loose_memory = loose_;
    return std::move(trace_);
  }

 private:
  static RegId reg_of(const Operand& op) { return std::get<Register>(op).id; }

  void tick() {
    if (++steps_ > opts_.step_budget)
      throw StepBudgetExceeded("step budget of " + std::to_string(opts_.step_budget) + " exceeded");
  }

  InstId first_of(BlockId b) const { return p_.block(b).instructions.front(); }

  std::optional<InstId> fallthrough(const Instruction& inst) const {
    const auto& body = p_.block(inst.block).instructions;
    if (inst.id != body.back()) return inst.id + 1;
    if (inst.block + 1 < p_.blocks().size()) return first_of(inst.block + 1);
    return std::nullopt;
  }

  bool mispredicts(InstId id, bool taken) const {
    const auto& pol = opts_.policy;
    switch (pol.mode) {
      case MispredictPolicy::Mode::never: return false;
      case MispredictPolicy::Mode::always: return true;
      case MispredictPolicy::Mode::per_site: {
        auto it = pol.sites.find(id);
        if (it == pol.sites.end()) return false;
        if (it->second == BranchDirection::wrong) return true;
        return (it->second == BranchDirection::taken) != taken;
      }
    }
    return false;
  }

  std::uint64_t value(const Operand& op, const std::vector<std::uint64_t>& regs) const {
    if (const auto* r = std::get_if<Register>(&op)) return regs[r->id];
    return std::get<Immediate>(op).value;
  }

  std::uint64_t address(const Instruction& inst, const std::vector<std::uint64_t>& regs) const {
    const MemRef& m = *inst.memref();
    std::uint64_t a = static_cast<std::uint64_t>(m.offset);
    if (!m.region.empty()) a += p_.find_region(m.region)->base;
    if (m.index) a += regs[*m.index] * m.scale;
    return a;
  }

  bool protected_read(std::uint64_t addr, std::uint8_t width) const {
    for (std::uint8_t k = 0; k < width; ++k) {
      const Region* r = p_.region_at(addr + k);
      if (r && r->is_protected) return true;
    }
    return false;
  }

  std::uint8_t read_byte(std::uint64_t addr, const Overlay* ov) const {
    if (ov) {
      auto it = ov->find(addr);
      if (it != ov->end()) return it->second;
    }
    if (const Region* r = p_.region_at(addr))
      return mem_[static_cast<std::size_t>(r - p_.regions().data())][addr - r->base];
    auto it = loose_.find(addr);
    return it == loose_.end() ? 0 : it->second;
  }

  std::uint64_t read(std::uint64_t addr, std::uint8_t width, const Overlay* ov) const {
    std::uint64_t v = 0;
    for (std::uint8_t k = 0; k < width; ++k)
      v |= static_cast<std::uint64_t>(read_byte(addr + k, ov)) << (8 * k);
    return v;
  }

  void write(std::uint64_t addr, std::uint8_t width, std::uint64_t v, Overlay* ov) {
    for (std::uint8_t k = 0; k < width; ++k) {
      const auto byte = static_cast<std::uint8_t>(v >> (8 * k));
      const std::uint64_t a = addr + k;
      if (ov) {
        (*ov)[a] = byte;
      } else if (const Region* r = p_.region_at(a)) {
        mem_[static_cast<std::size_t>(r - p_.regions().data())][a - r->base] = byte;
      } else {
        loose_[a] = byte;
      }
    }
  }

  Access describe(std::uint64_t addr, bool write) const {
    Access a;
    a.line = addr / opts_.geometry.line_size;
    a.write = write;
    a.offset = addr;
    if (const Region* r = p_.region_at(addr)) {
      a.region = r->name;
      a.offset = addr - r->base;
    }
    return a;
  }

  std::uint64_t consume(const std::string& callee) {
    std::uint64_t v = 0;
    auto it = input_.sources.find(callee);
    std::size_t& cur = cursor_[callee];
    for (int k = 0; k < 8; ++k, ++cur)
      if (it != input_.sources.end() && cur < it->second.size())
        v |= static_cast<std::uint64_t>(it->second[cur]) << (8 * k);
    return v;
  }

  /// Executes one instruction and returns the next pc; nullopt ends the run
  /// (halt) or the episode (barrier).
  std::optional<InstId> execute(const Instruction& inst, std::vector<std::uint64_t>& regs,
                                Overlay* ov, EventKind kind, std::uint32_t depth) {
    TraceEvent ev{inst.id, kind, std::nullopt, depth, std::nullopt};
    std::optional<InstId> next = fallthrough(inst);
    switch (inst.opcode) {
      case Opcode::binop:
        ev.value = evaluate(inst.binary, value(inst.operands[0], regs), value(inst.operands[1], regs));
        regs[*inst.dest] = *ev.value;
        break;
      case Opcode::unop:
        ev.value = evaluate(inst.unary, value(inst.operands[0], regs));
        regs[*inst.dest] = *ev.value;
        break;
      case Opcode::load: {
        const std::uint64_t addr = address(inst, regs);
        ev.access = describe(addr, false);
        ev.value = read(addr, inst.width, ov);
        regs[*inst.dest] = *ev.value;
        break;
      }
      case Opcode::store: {
        const std::uint64_t addr = address(inst, regs);
        const std::uint64_t v = value(inst.operands[1], regs);
        const std::uint64_t mask = inst.width >= 8 ? ~std::uint64_t{0}
                                                   : (std::uint64_t{1} << (8 * inst.width)) - 1;
        ev.access = describe(addr, true);
        ev.value = v & mask;
        write(addr, inst.width, v, ov);
        break;
      }
      case Opcode::branch: {
        const bool taken = regs[reg_of(inst.operands[0])] != 0;
        ev.value = taken ? 1 : 0;
        next = first_of(inst.targets[taken ? 0 : 1]);
        break;
      }
      case Opcode::jump:
        if (!inst.indirect) {
          next = first_of(inst.targets.at(0));
        } else {
          const std::uint64_t idx = regs[reg_of(inst.operands[0])];
          ev.value = idx;
          if (idx >= inst.targets.size()) {
            if (kind == EventKind::commit)
              throw std::runtime_error("indirect jump at instruction " + std::to_string(inst.id) +
                                       " selects target " + std::to_string(idx) + " of " +
                                       std::to_string(inst.targets.size()));
            next = std::nullopt;
          } else {
            next = first_of(inst.targets[idx]);
          }
        }
        break;
      case Opcode::call:
        ev.value = consume(inst.callee);
        regs[*inst.dest] = *ev.value;
        break;
      case Opcode::fence:
        break;
      case Opcode::time:
        ev.value = steps_;
        regs[*inst.dest] = steps_;
        break;
      case Opcode::halt:
        next = std::nullopt;
        break;
    }
    trace_.events.push_back(std::move(ev));
    return next;
  }

  /// Runs at most `budget` transient instructions from `pc`.  Fences,
  /// calls and halts end the episode without executing.
  void episode(InstId pc, std::vector<std::uint64_t>& regs, Overlay& ov, std::uint32_t depth,
               std::uint64_t budget) {
    for (std::uint64_t count = 0; count < budget; ++count) {
      const Instruction& inst = p_.instruction(pc);
      if (inst.opcode == Opcode::fence || inst.opcode == Opcode::call ||
          inst.opcode == Opcode::halt)
        return;
      tick();
      auto next = execute(inst, regs, &ov, EventKind::transient, depth);
      if (inst.opcode == Opcode::branch && static_cast<int>(depth) < opts_.max_depth) {
        const bool taken = regs[reg_of(inst.operands[0])] != 0;
        if (mispredicts(inst.id, taken)) {
          auto nested_regs = regs;
          Overlay nested_ov = ov;
          episode(first_of(inst.targets[taken ? 1 : 0]), nested_regs, nested_ov, depth + 1,
                  budget - count - 1);
        }
      }
      if (!next) return;
      pc = *next;
    }
  }

  const Program& p_;
  const SimInput& input_;
  const SimOptions& opts_;
  std::vector<std::uint64_t> regs_;
  std::vector<std::vector<std::uint8_t>> mem_;
  std::map<std::uint64_t, std::uint8_t> loose_;
  std::map<std::string, std::size_t> cursor_;
  std::uint64_t steps_ = 0;
  SpecTrace trace_;
};

std::vector<std::uint64_t> transient_lines(const SpecTrace& t) {
  std::vector<std::uint64_t> lines;
  for (const auto& e : t.events)
    if (e.kind == EventKind::transient && e.access) lines.push_back(e.access->line);
  std::sort(lines.begin(), lines.end());
  return lines;
}

bool transient_read_of(const SpecTrace& t, std::string_view region) {
  return std::any_of(t.events.begin(), t.events.end(), [&](const TraceEvent& e) {
    return e.kind == EventKind::transient && e.access && !e.access->write &&
           e.access->region == region;
  });
}

bool committed_touch(const SpecTrace& t, std::string_view region) {
  return std::any_of(t.events.begin(), t.events.end(), [&](const TraceEvent& e) {
    return e.kind != EventKind::transient && e.access && e.access->region == region;
  });
}

SimInput with_secret(const SimInput& in, const std::string& region,
                     const std::vector<std::uint8_t>& bytes) {
  SimInput out = in;
  out.memory.push_back({region, 0, bytes});
  return out;
}

}  // namespace

SpecTrace simulate(const Program& p, const SimInput& input, const SimOptions& opts) {
  opts.geometry.validate();
  return Machine(p, input, opts).run();
}

bool leaks_secret(const SpecTrace& a, const SpecTrace& b, std::string_view secret) {
  if (a.program_hash != b.program_hash)
    throw std::invalid_argument("traces come from different programs");
  if (!transient_read_of(a, secret) && !transient_read_of(b, secret)) return false;
  return transient_lines(a) != transient_lines(b);
}

DiffVerdict differential_check(const Program& p, const std::vector<Detection>& dets,
                               const DiffConfig& config) {
  DiffVerdict verdict;
  if (config.inputs.empty() || config.secret_pairs.empty()) return verdict;
  SimOptions opts;
  opts.sew = config.sew;
  opts.geometry = config.geometry;

  // Committed outcome sequences per branch and input.
  std::map<InstId, std::vector<std::vector<std::uint64_t>>> outcomes;
  for (const auto& in : config.inputs) {
    const auto t = simulate(p, with_secret(in, config.secret_region, config.secret_pairs[0].first), opts);
    std::map<InstId, std::vector<std::uint64_t>> seq;
    for (const auto& e : t.events)
      if (e.kind == EventKind::commit && p.instruction(e.inst).opcode == Opcode::branch)
        seq[e.inst].push_back(*e.value);
    for (const auto& inst : p.instructions())
      if (inst.opcode == Opcode::branch) outcomes[inst.id].push_back(seq[inst.id]);
  }
  for (const auto& [branch, runs] : outcomes) {
    bool varies = false;
    for (std::size_t i = 0; i < runs.size() && !varies; ++i)
      for (std::size_t j = i + 1; j < runs.size() && !varies; ++j) {
        const std::size_t n = std::min(runs[i].size(), runs[j].size());
        for (std::size_t k = 0; k < n; ++k)
          if (runs[i][k] != runs[j][k]) {
            varies = true;
            break;
          }
      }
    if (varies) verdict.trainable.push_back(branch);
  }

  for (InstId branch : verdict.trainable) {
    opts.policy = MispredictPolicy::at(branch);
    const bool covered = std::any_of(dets.begin(), dets.end(),
                                     [&](const Detection& d) { return d.tb == branch; });
    for (std::size_t i = 0; i < config.inputs.size(); ++i) {
      for (std::size_t k = 0; k < config.secret_pairs.size(); ++k) {
        const auto& [sa, sb] = config.secret_pairs[k];
        const auto ta = simulate(p, with_secret(config.inputs[i], config.secret_region, sa), opts);
        const auto tb = simulate(p, with_secret(config.inputs[i], config.secret_region, sb), opts);
        ++verdict.runs;
        if (committed_touch(ta, config.secret_region) || committed_touch(tb, config.secret_region)) {
          ++verdict.skipped;
          continue;
        }
        if (!leaks_secret(ta, tb, config.secret_region)) continue;
        verdict.leaks.push_back({branch, i, k});
        if (!covered) verdict.uncovered.push_back({branch, i, k});
      }
    }
  }
  verdict.pass = verdict.uncovered.empty();
  return verdict;
}

}  // namespace specguard
