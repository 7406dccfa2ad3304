#include "specguard/ir.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <limits>
#include <sstream>

namespace specguard {

namespace {

constexpr std::array<std::pair<std::string_view, BinaryOp>, 18> kBinaryOps{{
    {"add", BinaryOp::add}, {"sub", BinaryOp::sub}, {"mul", BinaryOp::mul},
    {"and", BinaryOp::and_}, {"or", BinaryOp::or_}, {"xor", BinaryOp::xor_},
    {"shl", BinaryOp::shl}, {"shr", BinaryOp::shr}, {"eq", BinaryOp::eq},
    {"ne", BinaryOp::ne}, {"lt", BinaryOp::lt}, {"le", BinaryOp::le},
    {"gt", BinaryOp::gt}, {"ge", BinaryOp::ge}, {"slt", BinaryOp::slt},
    {"sle", BinaryOp::sle}, {"sgt", BinaryOp::sgt}, {"sge", BinaryOp::sge},
}};

constexpr std::array<std::pair<std::string_view, UnaryOp>, 3> kUnaryOps{{
    {"mov", UnaryOp::mov}, {"neg", UnaryOp::neg}, {"not", UnaryOp::not_},
}};

std::optional<BinaryOp> lookup_binary(std::string_view name) {
  for (const auto& [text, op] : kBinaryOps)
    if (text == name) return op;
  return std::nullopt;
}

std::optional<UnaryOp> lookup_unary(std::string_view name) {
  for (const auto& [text, op] : kUnaryOps)
    if (text == name) return op;
  return std::nullopt;
}

enum class TokKind { ident, number, punct, end };

struct Token {
  TokKind kind = TokKind::end;
  std::string text;
  std::size_t column = 0;  // 1-based
};

std::vector<Token> tokenize(std::string_view line, std::size_t line_no) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < line.size()) {
    const char c = line[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    if (c == '#' || c == ';') break;
    const std::size_t start = i;
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      while (i < line.size() &&
             (std::isalnum(static_cast<unsigned char>(line[i])) || line[i] == '_'))
        ++i;
      out.push_back({TokKind::ident, std::string(line.substr(start, i - start)), start + 1});
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      while (i < line.size() && std::isalnum(static_cast<unsigned char>(line[i]))) ++i;
      out.push_back({TokKind::number, std::string(line.substr(start, i - start)), start + 1});
    } else if (c == '-' && i + 1 < line.size() && line[i + 1] == '>') {
      out.push_back({TokKind::punct, "->", start + 1});
      i += 2;
    } else if (std::string_view("=,[]+-*:@.").find(c) != std::string_view::npos) {
      out.push_back({TokKind::punct, std::string(1, c), start + 1});
      ++i;
    } else {
      throw ParseError(line_no, start + 1, std::string("unexpected character '") + c + "'");
    }
  }
  out.push_back({TokKind::end, "", line.size() + 1});
  return out;
}

std::uint64_t parse_unsigned(const Token& t, std::size_t line_no) {
  std::string_view s = t.text;
  int base = 10;
  if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) {
    base = 16;
    s.remove_prefix(2);
  }
  std::uint64_t value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value, base);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw ParseError(line_no, t.column, "invalid number '" + t.text + "'");
  return value;
}

class LineParser {
 public:
  LineParser(std::vector<Token> toks, std::size_t line_no)
      : toks_(std::move(toks)), line_(line_no) {}

  const Token& peek(std::size_t ahead = 0) const {
    return toks_[std::min(pos_ + ahead, toks_.size() - 1)];
  }
  bool at_end() const { return peek().kind == TokKind::end; }
  bool is_punct(std::string_view p, std::size_t ahead = 0) const {
    return peek(ahead).kind == TokKind::punct && peek(ahead).text == p;
  }
  bool is_ident(std::string_view word, std::size_t ahead = 0) const {
    return peek(ahead).kind == TokKind::ident && peek(ahead).text == word;
  }

  const Token& next() {
    const Token& t = peek();
    if (pos_ < toks_.size() - 1) ++pos_;
    return t;
  }

  [[noreturn]] void fail(const std::string& msg) const { fail_at(peek(), msg); }
  [[noreturn]] void fail_at(const Token& t, const std::string& msg) const {
    throw ParseError(line_, t.column, msg);
  }

  void expect_punct(std::string_view p) {
    if (!is_punct(p)) fail("expected '" + std::string(p) + "'");
    next();
  }
  const Token& expect_ident(std::string_view what) {
    if (peek().kind != TokKind::ident) fail("expected " + std::string(what));
    return next();
  }
  std::uint64_t expect_number() {
    if (peek().kind != TokKind::number) fail("expected number");
    return parse_unsigned(next(), line_);
  }
  /// Optionally negative number.
  std::uint64_t expect_signed_number() {
    bool negative = false;
    if (is_punct("-")) {
      next();
      negative = true;
    }
    const std::uint64_t v = expect_number();
    return negative ? (~v + 1) : v;
  }
  void expect_end() {
    if (!at_end()) fail("unexpected '" + peek().text + "'");
  }
  std::size_t line() const { return line_; }

 private:
  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  std::size_t line_;
};

struct PendingTarget {
  InstId inst;
  std::vector<std::pair<std::string, Token>> labels;  // name and where it was written
  bool maybe_register = false;                         // `jmp NAME` without annotation
  std::size_t line;
};

class Parser {
 public:
  Program run(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
      std::size_t end = text.find('\n', start);
      if (end == std::string_view::npos) end = text.size();
      lines.push_back(text.substr(start, end - start));
      start = end + 1;
    }

    // Header declarations first so memory operands can refer to regions
    // declared further down.
    for (std::size_t i = 0; i < lines.size(); ++i) {
      LineParser lp(tokenize(lines[i], i + 1), i + 1);
      if (lp.is_ident("region") && lp.peek(1).kind == TokKind::ident) parse_region(lp);
      else if (lp.is_ident("source") && lp.peek(1).kind == TokKind::ident) parse_source(lp);
    }
    check_regions();

    for (std::size_t i = 0; i < lines.size(); ++i) {
      LineParser lp(tokenize(lines[i], i + 1), i + 1);
      if (lp.at_end()) continue;
      if ((lp.is_ident("region") || lp.is_ident("source")) && lp.peek(1).kind == TokKind::ident)
        continue;
      parse_body_line(lp);
    }
    if (builder_.block_count() == 0) throw ParseError(lines.size(), 1, "program has no instructions");
    close_block(last_instruction_line_);
    resolve_targets();
    return std::move(builder_).finish();
  }

 private:
  void parse_region(LineParser& lp) {
    lp.next();
    const Token& name = lp.expect_ident("region name");
    if (regions_seen_.contains(name.text)) lp.fail_at(name, "duplicate region '" + name.text + "'");
    Region r;
    r.name = name.text;
    lp.expect_punct("@");
    r.base = lp.expect_number();
    if (!lp.is_ident("size")) lp.fail("expected 'size'");
    lp.next();
    r.size = lp.expect_number();
    if (r.size == 0) lp.fail("region size must be positive");
    while (!lp.at_end()) {
      const Token& attr = lp.expect_ident("region attribute");
      if (attr.text == "protected") r.is_protected = true;
      else if (attr.text == "readonly") r.readonly = true;
      else lp.fail_at(attr, "unknown region attribute '" + attr.text + "'");
    }
    regions_seen_.insert({r.name, {lp.line(), name.column}});
    region_decls_.push_back(r);
    builder_.add_region(std::move(r));
  }

  void parse_source(LineParser& lp) {
    lp.next();
    const Token& name = lp.expect_ident("source name");
    lp.expect_end();
    builder_.add_source(name.text);
  }

  void check_regions() {
    std::vector<const Region*> sorted;
    for (const auto& r : region_decls_) sorted.push_back(&r);
    std::sort(sorted.begin(), sorted.end(),
              [](const Region* a, const Region* b) { return a->base < b->base; });
    for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
      const Region& a = *sorted[i];
      const Region& b = *sorted[i + 1];
      if (a.base + a.size > b.base || a.base + a.size < a.base) {
        const auto [line, col] = regions_seen_.at(b.name);
        throw ParseError(line, col, "region '" + b.name + "' overlaps region '" + a.name + "'");
      }
    }
  }

  void parse_body_line(LineParser& lp) {
    if (lp.peek().kind == TokKind::ident && lp.is_punct(":", 1)) {
      const Token& label = lp.next();
      lp.next();
      lp.expect_end();
      start_block(label, lp.line());
      return;
    }
    if (needs_label_) {
      if (builder_.block_count() == 0) {
        start_block(Token{TokKind::ident, "entry", 1}, lp.line());
      } else {
        lp.fail("instruction after a terminator needs a label");
      }
    }
    Instruction inst = parse_instruction(lp);
    last_instruction_line_ = lp.line();
    const bool terminator = inst.is_terminator();
    const InstId id = builder_.append(std::move(inst));
    if (!pending_.empty() && pending_.back().inst == kPendingCurrent) pending_.back().inst = id;
    ++block_size_;
    if (terminator) {
      needs_label_ = true;
      last_terminated_ = true;
    } else {
      last_terminated_ = false;
    }
  }

  void start_block(const Token& label, std::size_t line) {
    if (labels_.contains(label.text))
      throw ParseError(line, label.column, "duplicate label '" + label.text + "'");
    close_block(line);
    labels_.insert(label.text);
    builder_.add_block(label.text);
    current_label_ = label.text;
    block_size_ = 0;
    needs_label_ = false;
    last_terminated_ = false;
  }

  void close_block(std::size_t line) {
    if (builder_.block_count() == 0) return;
    if (block_size_ == 0) throw ParseError(line, 1, "block '" + current_label_ + "' is empty");
    has_open_fallthrough_ = !last_terminated_;
    line_of_end_ = line;
    if (has_open_fallthrough_) last_open_label_ = current_label_;
  }

  std::variant<Register, Immediate> parse_value(LineParser& lp) {
    if (lp.peek().kind == TokKind::number || lp.is_punct("-"))
      return Immediate{lp.expect_signed_number()};
    const Token& name = lp.expect_ident("register or immediate");
    return Register{builder_.intern_register(name.text)};
  }

  static Operand widen(std::variant<Register, Immediate> v) {
    return std::visit([](auto x) -> Operand { return x; }, v);
  }

  RegId parse_register(LineParser& lp) {
    const Token& name = lp.expect_ident("register");
    return builder_.intern_register(name.text);
  }

  std::uint8_t parse_width(LineParser& lp) {
    if (!lp.is_punct(".")) return 8;
    lp.next();
    const Token& t = lp.peek();
    const std::uint64_t w = lp.expect_number();
    if (w != 1 && w != 2 && w != 4 && w != 8) lp.fail_at(t, "access width must be 1, 2, 4 or 8");
    return static_cast<std::uint8_t>(w);
  }

  MemRef parse_memref(LineParser& lp) {
    lp.expect_punct("[");
    MemRef m;
    bool first = true;
    bool have_region = false;
    while (true) {
      bool negative = false;
      if (!first) {
        if (lp.is_punct("]")) break;
        if (lp.is_punct("+")) lp.next();
        else if (lp.is_punct("-")) {
          lp.next();
          negative = true;
        } else {
          lp.fail("expected '+', '-' or ']'");
        }
      } else if (lp.is_punct("-")) {
        lp.next();
        negative = true;
      }
      first = false;
      const Token& t = lp.peek();
      if (t.kind == TokKind::number) {
        const std::uint64_t v = lp.expect_number();
        const auto sv = static_cast<std::int64_t>(v);
        m.offset += negative ? -sv : sv;
        continue;
      }
      const Token& name = lp.expect_ident("region, register or offset");
      if (lp.is_punct("*")) {
        lp.next();
        const Token& st = lp.peek();
        const std::uint64_t scale = lp.expect_number();
        if (scale < 1) lp.fail_at(st, "scale must be at least 1");
        if (negative) lp.fail_at(name, "index term cannot be negated");
        if (m.index) lp.fail_at(name, "memory operand has more than one index register");
        m.index = builder_.intern_register(name.text);
        m.scale = scale;
        continue;
      }
      if (regions_seen_.contains(name.text) && !have_region) {
        if (negative) lp.fail_at(name, "region term cannot be negated");
        m.region = name.text;
        have_region = true;
        continue;
      }
      if (negative) lp.fail_at(name, "index term cannot be negated");
      if (m.index) lp.fail_at(name, "undeclared region '" + name.text + "'");
      if (!have_region && region_typo(lp)) lp.fail_at(name, "undeclared region '" + name.text + "'");
      m.index = builder_.intern_register(name.text);
      m.scale = 1;
    }
    lp.expect_punct("]");
    return m;
  }

  // `[name + x]` where name is not a declared region and x is a register is
  // almost certainly a typo in a region name.
  bool region_typo(const LineParser& lp) const {
    return lp.is_punct("+") && lp.peek(1).kind == TokKind::ident && !lp.is_punct("*", 2) &&
           !regions_seen_.contains(lp.peek(1).text);
  }

  static constexpr InstId kPendingCurrent = std::numeric_limits<InstId>::max();

  Instruction parse_instruction(LineParser& lp) {
    Instruction inst;
    if (lp.peek().kind != TokKind::ident) lp.fail("expected instruction");
    if (lp.is_punct("=", 1)) {
      const Token& dest = lp.next();
      lp.next();
      inst.dest = builder_.intern_register(dest.text);
      const Token& op = lp.expect_ident("operation");
      if (op.text == "load") {
        inst.opcode = Opcode::load;
        inst.width = parse_width(lp);
        inst.operands.push_back(parse_memref(lp));
      } else if (op.text == "time") {
        inst.opcode = Opcode::time;
      } else if (auto u = lookup_unary(op.text)) {
        inst.opcode = Opcode::unop;
        inst.unary = *u;
        inst.operands.push_back(widen(parse_value(lp)));
      } else if (auto b = lookup_binary(op.text)) {
        inst.opcode = Opcode::binop;
        inst.binary = *b;
        inst.operands.push_back(widen(parse_value(lp)));
        lp.expect_punct(",");
        inst.operands.push_back(widen(parse_value(lp)));
      } else {
        lp.fail_at(op, "unknown operation '" + op.text + "'");
      }
      lp.expect_end();
      return inst;
    }

    const Token& op = lp.next();
    if (op.text == "store") {
      inst.opcode = Opcode::store;
      inst.width = parse_width(lp);
      inst.operands.push_back(parse_memref(lp));
      lp.expect_punct(",");
      inst.operands.push_back(widen(parse_value(lp)));
    } else if (op.text == "br") {
      inst.opcode = Opcode::branch;
      inst.operands.push_back(Register{parse_register(lp)});
      PendingTarget pt{kPendingCurrent, {}, false, lp.line()};
      lp.expect_punct(",");
      const Token& t1 = lp.expect_ident("label");
      pt.labels.emplace_back(t1.text, t1);
      lp.expect_punct(",");
      const Token& t2 = lp.expect_ident("label");
      pt.labels.emplace_back(t2.text, t2);
      pending_.push_back(std::move(pt));
    } else if (op.text == "jmp") {
      inst.opcode = Opcode::jump;
      const Token& target = lp.expect_ident("label or register");
      PendingTarget pt{kPendingCurrent, {}, false, lp.line()};
      if (lp.is_ident("targets")) {
        lp.next();
        inst.indirect = true;
        inst.operands.push_back(Register{builder_.intern_register(target.text)});
        lp.expect_punct("[");
        while (!lp.is_punct("]")) {
          const Token& l = lp.expect_ident("label");
          pt.labels.emplace_back(l.text, l);
          if (lp.is_punct(",")) lp.next();
          else if (!lp.is_punct("]")) lp.fail("expected ',' or ']'");
        }
        lp.next();
      } else {
        pt.labels.emplace_back(target.text, target);
        pt.maybe_register = true;
      }
      pending_.push_back(std::move(pt));
    } else if (op.text == "call") {
      inst.opcode = Opcode::call;
      inst.callee = lp.expect_ident("callee").text;
      lp.expect_punct("->");
      inst.dest = parse_register(lp);
    } else if (op.text == "fence") {
      inst.opcode = Opcode::fence;
    } else if (op.text == "halt") {
      inst.opcode = Opcode::halt;
    } else {
      lp.fail_at(op, "unknown instruction '" + op.text + "'");
    }
    lp.expect_end();
    return inst;
  }

  void resolve_targets() {
    const Program& p = builder_.view();
    if (has_open_fallthrough_)
      throw ParseError(line_of_end_, 1,
                       "control falls off the end of the program after block '" +
                           last_open_label_ + "'");
    for (const auto& pt : pending_) {
      Instruction& inst = builder_.instruction(pt.inst);
      if (pt.maybe_register) {
        const auto& [name, tok] = pt.labels.front();
        if (auto b = p.find_block(name)) {
          inst.targets.push_back(*b);
        } else if (auto r = p.find_register(name)) {
          inst.indirect = true;
          inst.operands.push_back(Register{*r});
        } else {
          throw ParseError(pt.line, tok.column, "unresolved label '" + name + "'");
        }
        continue;
      }
      for (const auto& [name, tok] : pt.labels) {
        auto b = p.find_block(name);
        if (!b) throw ParseError(pt.line, tok.column, "unresolved label '" + name + "'");
        inst.targets.push_back(*b);
      }
    }
  }

  ProgramBuilder builder_;
  std::vector<Region> region_decls_;
  std::unordered_map<std::string, std::pair<std::size_t, std::size_t>> regions_seen_;
  struct LabelSet {
    bool contains(const std::string& s) const {
      return std::find(v.begin(), v.end(), s) != v.end();
    }
    void insert(std::string s) { v.push_back(std::move(s)); }
    std::vector<std::string> v;
  } labels_;
  std::vector<PendingTarget> pending_;
  std::string current_label_;
  std::string last_open_label_;
  std::size_t block_size_ = 0;
  std::size_t line_of_end_ = 0;
  std::size_t last_instruction_line_ = 0;
  bool needs_label_ = true;
  bool last_terminated_ = false;
  bool has_open_fallthrough_ = false;
};

std::string format_signed(std::uint64_t v) {
  if (v >> 63) return "-" + std::to_string(~v + 1);
  return std::to_string(v);
}

std::string format_hex(std::uint64_t v) {
  std::ostringstream os;
  os << "0x" << std::hex << v;
  return os.str();
}

}  // namespace

std::string_view to_string(Opcode op) {
  switch (op) {
    case Opcode::binop: return "binop";
    case Opcode::unop: return "unop";
    case Opcode::load: return "load";
    case Opcode::store: return "store";
    case Opcode::branch: return "branch";
    case Opcode::jump: return "jump";
    case Opcode::call: return "call";
    case Opcode::fence: return "fence";
    case Opcode::time: return "time";
    case Opcode::halt: return "halt";
  }
  return "?";
}

std::string_view to_string(BinaryOp op) {
  for (const auto& [text, b] : kBinaryOps)
    if (b == op) return text;
  return "?";
}

std::string_view to_string(UnaryOp op) {
  for (const auto& [text, u] : kUnaryOps)
    if (u == op) return text;
  return "?";
}

std::uint64_t evaluate(BinaryOp op, std::uint64_t a, std::uint64_t b) {
  const auto sa = static_cast<std::int64_t>(a);
  const auto sb = static_cast<std::int64_t>(b);
  switch (op) {
    case BinaryOp::add: return a + b;
    case BinaryOp::sub: return a - b;
    case BinaryOp::mul: return a * b;
    case BinaryOp::and_: return a & b;
    case BinaryOp::or_: return a | b;
    case BinaryOp::xor_: return a ^ b;
    case BinaryOp::shl: return a << (b & 63);
    case BinaryOp::shr: return a >> (b & 63);
    case BinaryOp::eq: return a == b;
    case BinaryOp::ne: return a != b;
    case BinaryOp::lt: return a < b;
    case BinaryOp::le: return a <= b;
    case BinaryOp::gt: return a > b;
    case BinaryOp::ge: return a >= b;
    case BinaryOp::slt: return sa < sb;
    case BinaryOp::sle: return sa <= sb;
    case BinaryOp::sgt: return sa > sb;
    case BinaryOp::sge: return sa >= sb;
  }
  return 0;
}

std::uint64_t evaluate(UnaryOp op, std::uint64_t a) {
  switch (op) {
    case UnaryOp::mov: return a;
    case UnaryOp::neg: return ~a + 1;
    case UnaryOp::not_: return ~a;
  }
  return 0;
}

const MemRef* Instruction::memref() const {
  if (!is_memory() || operands.empty()) return nullptr;
  return std::get_if<MemRef>(&operands.front());
}

std::vector<RegId> Instruction::used_registers() const {
  std::vector<RegId> regs;
  for (const auto& op : operands) {
    if (const auto* r = std::get_if<Register>(&op)) regs.push_back(r->id);
    else if (const auto* m = std::get_if<MemRef>(&op); m && m->index) regs.push_back(*m->index);
  }
  std::sort(regs.begin(), regs.end());
  regs.erase(std::unique(regs.begin(), regs.end()), regs.end());
  return regs;
}

std::optional<RegId> Instruction::address_register() const {
  const MemRef* m = memref();
  return m ? m->index : std::nullopt;
}

const Region* Program::find_region(std::string_view name) const {
  for (const auto& r : regions_)
    if (r.name == name) return &r;
  return nullptr;
}

const Region* Program::region_at(std::uint64_t address) const {
  for (const auto& r : regions_)
    if (r.contains(address)) return &r;
  return nullptr;
}

std::optional<BlockId> Program::find_block(std::string_view label) const {
  for (BlockId b = 0; b < blocks_.size(); ++b)
    if (blocks_[b].label == label) return b;
  return std::nullopt;
}

std::optional<RegId> Program::find_register(std::string_view name) const {
  auto it = register_index_.find(std::string(name));
  if (it == register_index_.end()) return std::nullopt;
  return it->second;
}

bool Program::is_sensitive(const Region& region) const {
  return region.is_protected || region.name == kSysRegRegion || region.name == kFpRegRegion;
}

ProgramBuilder ProgramBuilder::with_header_of(const Program& p) {
  ProgramBuilder b;
  b.program_.regions_ = p.regions_;
  b.program_.sources_ = p.sources_;
  b.program_.registers_ = p.registers_;
  b.program_.register_index_ = p.register_index_;
  return b;
}

void ProgramBuilder::add_region(Region r) { program_.regions_.push_back(std::move(r)); }

void ProgramBuilder::add_source(std::string name) {
  auto& s = program_.sources_;
  if (std::find(s.begin(), s.end(), name) == s.end()) s.push_back(std::move(name));
}

RegId ProgramBuilder::intern_register(std::string_view name) {
  auto [it, inserted] = program_.register_index_.try_emplace(
      std::string(name), static_cast<RegId>(program_.registers_.size()));
  if (inserted) program_.registers_.emplace_back(name);
  return it->second;
}

BlockId ProgramBuilder::add_block(std::string label) {
  program_.blocks_.push_back(Block{std::move(label), {}});
  return static_cast<BlockId>(program_.blocks_.size() - 1);
}

InstId ProgramBuilder::append(Instruction inst) {
  if (program_.blocks_.empty()) throw std::logic_error("append before add_block");
  inst.id = static_cast<InstId>(program_.instructions_.size());
  inst.block = static_cast<BlockId>(program_.blocks_.size() - 1);
  program_.blocks_.back().instructions.push_back(inst.id);
  program_.instructions_.push_back(std::move(inst));
  return program_.instructions_.back().id;
}

Program ProgramBuilder::finish() && { return std::move(program_); }

ParseError::ParseError(std::size_t line, std::size_t column, const std::string& message)
    : std::runtime_error("line " + std::to_string(line) + ", column " + std::to_string(column) +
                         ": " + message),
      line_(line),
      column_(column) {}

Program parse_program(std::string_view text) { return Parser{}.run(text); }

std::string print_memref(const Program& p, const MemRef& m) {
  std::string out = "[";
  bool first = true;
  auto term = [&](const std::string& s, bool negative = false) {
    if (!first) out += negative ? " - " : " + ";
    else if (negative) out += "-";
    out += s;
    first = false;
  };
  if (!m.region.empty()) term(m.region);
  if (m.offset != 0 || (m.region.empty() && !m.index)) {
    const bool neg = m.offset < 0;
    const std::uint64_t mag =
        neg ? ~static_cast<std::uint64_t>(m.offset) + 1 : static_cast<std::uint64_t>(m.offset);
    term(std::to_string(mag), neg);
  }
  if (m.index) term(p.register_name(*m.index) + "*" + std::to_string(m.scale));
  out += "]";
  return out;
}

std::string print_instruction(const Program& p, const Instruction& inst) {
  auto value = [&](const Operand& op) -> std::string {
    if (const auto* r = std::get_if<Register>(&op)) return p.register_name(r->id);
    if (const auto* i = std::get_if<Immediate>(&op)) return format_signed(i->value);
    return print_memref(p, std::get<MemRef>(op));
  };
  auto label = [&](BlockId b) { return p.block(b).label; };
  std::string dest = inst.dest ? p.register_name(*inst.dest) + " = " : "";
  switch (inst.opcode) {
    case Opcode::binop:
      return dest + std::string(to_string(inst.binary)) + " " + value(inst.operands[0]) + ", " +
             value(inst.operands[1]);
    case Opcode::unop:
      return dest + std::string(to_string(inst.unary)) + " " + value(inst.operands[0]);
    case Opcode::load:
      return dest + "load." + std::to_string(inst.width) + " " + value(inst.operands[0]);
    case Opcode::store:
      return "store." + std::to_string(inst.width) + " " + value(inst.operands[0]) + ", " +
             value(inst.operands[1]);
    case Opcode::branch:
      return "br " + value(inst.operands[0]) + ", " + label(inst.targets[0]) + ", " +
             label(inst.targets[1]);
    case Opcode::jump: {
      if (!inst.indirect) return "jmp " + label(inst.targets.at(0));
      std::string s = "jmp " + value(inst.operands.at(0)) + " targets [";
      for (std::size_t i = 0; i < inst.targets.size(); ++i)
        s += (i ? ", " : "") + label(inst.targets[i]);
      return s + "]";
    }
    case Opcode::call: return "call " + inst.callee + " -> " + p.register_name(*inst.dest);
    case Opcode::fence: return "fence";
    case Opcode::time: return dest + "time";
    case Opcode::halt: return "halt";
  }
  return "?";
}

std::string print_program(const Program& p) {
  std::string out;
  for (const auto& r : p.regions()) {
    out += "region " + r.name + " @" + format_hex(r.base) + " size " + std::to_string(r.size);
    if (r.is_protected) out += " protected";
    if (r.readonly) out += " readonly";
    out += "\n";
  }
  for (const auto& s : p.sources()) out += "source " + s + "\n";
  if (!p.regions().empty() || !p.sources().empty()) out += "\n";
  for (const auto& b : p.blocks()) {
    out += b.label + ":\n";
    for (InstId id : b.instructions) out += "  " + print_instruction(p, p.instruction(id)) + "\n";
  }
  return out;
}

}  // namespace specguard
