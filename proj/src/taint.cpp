#include "specguard/taint.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace specguard {

std::string_view to_string(TaintMode m) {
  return m == TaintMode::data_only ? "data_only" : "program_dep";
}

std::optional<TaintMode> parse_taint_mode(std::string_view text) {
  if (text == "data_only") return TaintMode::data_only;
  if (text == "program_dep") return TaintMode::program_dep;
  return std::nullopt;
}

const std::vector<std::string>& default_taint_sources() {
  static const std::vector<std::string> sources{"read", "fread", "fgets", "fgetc",
                                                "recv", "getenv", "scanf"};
  return sources;
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\"'");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\"'");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

TaintConfig parse_taint_config(std::string_view text) {
  TaintConfig config;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    std::string value = trim(std::string_view(line).substr(eq + 1));
    if (key == "sources") {
      if (value.size() < 2 || value.front() != '[' || value.back() != ']')
        throw std::runtime_error("config line " + std::to_string(line_no) +
                                 ": sources must be a [list]");
      config.sources.clear();
      std::istringstream items(value.substr(1, value.size() - 2));
      std::string item;
      while (std::getline(items, item, ',')) {
        item = trim(item);
        if (!item.empty()) config.sources.push_back(item);
      }
    } else if (key == "mode") {
      auto mode = parse_taint_mode(value);
      if (!mode)
        throw std::runtime_error("config line " + std::to_string(line_no) + ": unknown mode '" +
                                 value + "'");
      config.mode = *mode;
    } else {
      throw std::runtime_error("config line " + std::to_string(line_no) + ": unknown key '" + key +
                               "'");
    }
  }
  return config;
}

std::string_view to_string(TaintRule r) {
  switch (r) {
    case TaintRule::source: return "source";
    case TaintRule::opaque_call: return "opaque_call";
    case TaintRule::binary: return "binary";
    case TaintRule::unary: return "unary";
    case TaintRule::load_value: return "load_value";
    case TaintRule::load_address: return "load_address";
    case TaintRule::store_value: return "store_value";
    case TaintRule::store_address: return "store_address";
    case TaintRule::branch: return "branch";
    case TaintRule::jump: return "jump";
    case TaintRule::implicit: return "implicit";
  }
  return "?";
}

TaintState::TaintState(std::size_t n) : witness_(n), reads_(n), address_(n) {}

bool TaintState::register_at(InstId inst, RegId reg) const {
  if (inst >= reads_.size()) return false;
  return std::binary_search(reads_[inst].begin(), reads_[inst].end(), reg);
}

bool TaintState::value_at(const AbstractLoc& loc) const {
  return std::any_of(value_locs_.begin(), value_locs_.end(),
                     [&](const TaintedLoc& t) { return may_alias(t.loc, loc); });
}

bool TaintState::address_location(const AbstractLoc& loc) const {
  return std::any_of(address_locs_.begin(), address_locs_.end(),
                     [&](const TaintedLoc& t) { return may_alias(t.loc, loc); });
}

std::vector<Witness> TaintState::chain(InstId inst) const {
  std::vector<Witness> out;
  for (std::optional<InstId> cur = inst; cur && instruction(*cur);) {
    out.push_back(*witness_[*cur]);
    cur = witness_[*cur]->parent;
  }
  return out;
}

std::vector<Witness> TaintState::address_chain(InstId inst) const {
  if (!address(inst)) return {};
  return chain(*address_[inst]);
}

std::vector<InstId> TaintState::tainted_instructions() const {
  std::vector<InstId> out;
  for (InstId i = 0; i < witness_.size(); ++i)
    if (witness_[i]) out.push_back(i);
  return out;
}

TaintState seed_taints(const Program& p, const Cfg& cfg, const TaintConfig& config) {
  (void)cfg;
  TaintState ts(p.size());
  ts.mode_ = config.mode;
  std::vector<char> used(config.sources.size(), 0);
  for (const auto& inst : p.instructions()) {
    if (inst.opcode != Opcode::call) continue;
    auto it = std::find(config.sources.begin(), config.sources.end(), inst.callee);
    const auto& declared = p.sources();
    if (it != config.sources.end()) used[static_cast<std::size_t>(it - config.sources.begin())] = 1;
    else if (std::find(declared.begin(), declared.end(), inst.callee) == declared.end()) continue;
    ts.witness_[inst.id] = Witness{inst.id, TaintRule::source, std::nullopt};
  }
  std::string unused;
  for (std::size_t s = 0; s < config.sources.size(); ++s)
    if (!used[s]) unused += (unused.empty() ? "" : ", ") + config.sources[s];
  if (!unused.empty()) ts.warnings_.push_back("taint sources never called: " + unused);
  return ts;
}

TaintState propagate(const Cfg& cfg, const DefUse& du, const Cdg& cdg, const TaintState& seed,
                     TaintMode mode) {
  const Program& p = cfg.program();
  const std::size_t n = p.size();
  TaintState ts = seed;
  ts.mode_ = mode;
  ts.witness_.resize(n);
  ts.reads_.resize(n);
  ts.address_.resize(n);
  std::vector<char> value_store(n, 0);
  std::vector<char> address_access(n, 0);
  for (const auto& t : ts.value_locs_) value_store[t.by] = 1;
  for (const auto& t : ts.address_locs_) address_access[t.by] = 1;

  // Smallest tainted reaching definition of `reg` at `inst`.
  auto tainted_def = [&](InstId inst, RegId reg) -> std::optional<InstId> {
    for (const RegisterUse& use : du.uses(inst)) {
      if (use.reg != reg) continue;
      for (InstId d : use.defs)
        if (ts.witness_[d]) return d;
    }
    return std::nullopt;
  };
  auto operand_def = [&](InstId inst, const Operand& op) -> std::optional<InstId> {
    if (const auto* r = std::get_if<Register>(&op)) return tainted_def(inst, r->id);
    return std::nullopt;
  };

  for (bool changed = true; changed;) {
    changed = false;
    for (InstId i = 0; i < n; ++i) {
      const Instruction& inst = p.instruction(i);

      std::vector<RegId> reads;
      for (const RegisterUse& use : du.uses(i))
        if (tainted_def(i, use.reg)) reads.push_back(use.reg);
      if (reads != ts.reads_[i]) {
        ts.reads_[i] = std::move(reads);
        changed = true;
      }
      std::optional<InstId> addr_def;
      if (auto idx = inst.address_register()) addr_def = tainted_def(i, *idx);
      if (addr_def && !ts.address_[i]) {
        ts.address_[i] = addr_def;
        changed = true;
      }

      if (!ts.witness_[i]) {
        std::optional<Witness> w;
        auto set = [&](TaintRule rule, std::optional<InstId> parent) {
          if (!w) w = Witness{i, rule, parent};
        };
        switch (inst.opcode) {
          case Opcode::call:
            set(TaintRule::opaque_call, std::nullopt);
            break;
          case Opcode::binop:
            if (auto d = operand_def(i, inst.operands[0])) set(TaintRule::binary, d);
            if (auto d = operand_def(i, inst.operands[1])) set(TaintRule::binary, d);
            break;
          case Opcode::unop:
            if (auto d = operand_def(i, inst.operands[0])) set(TaintRule::unary, d);
            break;
          case Opcode::load:
            if (addr_def) set(TaintRule::load_address, addr_def);
            for (const auto& t : ts.value_locs_)
              if (may_alias(t.loc, *du.location(i))) {
                set(TaintRule::load_value, t.by);
                break;
              }
            break;
          case Opcode::store:
            if (auto d = operand_def(i, inst.operands[1])) set(TaintRule::store_value, d);
            if (addr_def) set(TaintRule::store_address, addr_def);
            break;
          case Opcode::branch:
            if (auto d = operand_def(i, inst.operands[0])) set(TaintRule::branch, d);
            break;
          case Opcode::jump:
            if (inst.indirect)
              if (auto d = operand_def(i, inst.operands[0])) set(TaintRule::jump, d);
            break;
          default:
            break;
        }
        if (mode == TaintMode::program_dep) {
          for (InstId b : cdg.controllers(i))
            if (ts.witness_[b]) {
              set(TaintRule::implicit, b);
              break;
            }
        }
        if (w) {
          ts.witness_[i] = w;
          changed = true;
        }
      }

      if (inst.opcode == Opcode::store && ts.witness_[i] && !value_store[i]) {
        value_store[i] = 1;
        ts.value_locs_.push_back({*du.location(i), i});
        changed = true;
      }
      if (inst.is_memory() && ts.address_[i] && !address_access[i]) {
        address_access[i] = 1;
        ts.address_locs_.push_back({*du.location(i), i});
        changed = true;
      }
    }
  }
  return ts;
}

bool is_tainted(const TaintState& ts, InstId inst) { return ts.instruction(inst); }

bool is_tainted(const TaintState& ts, const Entity& e) {
  return std::visit(
      [&](const auto& x) -> bool {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, InstructionRef>) return ts.instruction(x.id);
        else if constexpr (std::is_same_v<T, RegisterAt>) return ts.register_at(x.inst, x.reg);
        else if constexpr (std::is_same_v<T, AddressOf>) return ts.address(x.inst);
        else return ts.value_at(x);
      },
      e);
}

}  // namespace specguard
