#include "fuzz.hpp"

#include <algorithm>
#include <sstream>

namespace specguard::testing {

const char* const kLitmusHeader =
    "region sizes @0x800 size 64 readonly\n"
    "region array1 @0x1000 size 64\n"
    "region secret @0x1040 size 64\n"
    "region temp @0x2000 size 64\n"
    "region state @0x3000 size 64\n"
    "region array2 @0x100000 size 131072\n"
    "source read\n\n";

namespace {

std::size_t pick(Rng& rng, std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); }
bool chance(Rng& rng, double p) { return std::bernoulli_distribution(p)(rng); }

constexpr std::size_t kRegisters = 6;

std::string reg(Rng& rng) { return "r" + std::to_string(pick(rng, kRegisters)); }
// r0 holds the first source read for the whole run; other writes avoid it.
std::string dest_reg(Rng& rng) { return "r" + std::to_string(1 + pick(rng, kRegisters - 1)); }
std::string index_reg(Rng& rng) { return chance(rng, 0.5) ? "r0" : reg(rng); }

const char* const kBinops[] = {"add", "sub", "and", "or", "xor", "shl", "shr", "lt", "eq", "ne", "mul"};

// Emits one non-terminator instruction; returns how many lines it wrote.
std::size_t emit_body(Rng& rng, std::ostringstream& os) {
  const std::string d = dest_reg(rng), a = index_reg(rng), b = reg(rng), e = dest_reg(rng);
  switch (pick(rng, 14)) {
    case 0: os << "  call read -> " << d << "\n"; return 1;
    case 1: os << "  " << d << " = load [sizes]\n"; return 1;
    case 2: os << "  " << d << " = load.1 [array1 + " << a << "]\n"; return 1;
    case 3: os << "  " << d << " = shl " << a << ", 9\n"; return 1;
    case 4: os << "  " << d << " = load.1 [array2 + " << a << "]\n"; return 1;
    case 5:
    case 6: os << "  " << d << " = " << kBinops[pick(rng, std::size(kBinops))] << " " << a << ", " << b << "\n"; return 1;
    case 7: os << "  " << d << " = " << kBinops[pick(rng, std::size(kBinops))] << " " << a << ", " << pick(rng, 64) << "\n"; return 1;
    case 8: os << "  store [temp], " << a << "\n"; return 1;
    case 9: os << "  store.1 [array1 + " << a << "], " << b << "\n"; return 1;
    case 10: os << "  store [state + " << 8 * pick(rng, 4) << "], " << a << "\n"; return 1;
    case 11: os << "  " << d << " = load [state + " << 8 * pick(rng, 4) << "]\n"; return 1;
    case 12:
      if (chance(rng, 0.3)) {
        os << "  fence\n";
        return 1;
      }
      os << "  " << d << " = mov " << a << "\n";
      return 1;
    default:
      // Bounds-checked gadget body pieces, to make leaks common.
      os << "  " << d << " = load.1 [array1 + " << a << "]\n"
         << "  " << d << " = shl " << d << ", 9\n"
         << "  " << e << " = load.1 [array2 + " << d << "]\n";
      return 3;
  }
}

}  // namespace

std::string random_program_text(Rng& rng, const FuzzOptions& opts) {
  const std::size_t branches = 1 + pick(rng, opts.max_branches);
  const std::size_t blocks = branches + 1 + pick(rng, 3);
  // Reserved: one body instruction and one terminator per block, one
  // compare per branch, and the two header instructions.  `used` counts
  // everything else.
  const std::size_t budget = opts.max_instructions - 2 * blocks - branches - 2;
  const std::size_t per_block = std::max<std::size_t>(1, std::min<std::size_t>(6, budget / blocks));
  std::size_t used = 0, branches_left = branches;
  bool guarded_next = false;

  std::ostringstream os;
  os << kLitmusHeader;
  for (std::size_t b = 0; b < blocks; ++b) {
    os << "b" << b << ":\n";
    if (b == 0) os << "  call read -> r0\n  r1 = load [sizes]\n";
    if (guarded_next && used + 3 < budget) {
      const std::string d = dest_reg(rng);
      os << "  " << d << " = load.1 [array1 + r0]\n"
         << "  " << d << " = shl " << d << ", 9\n"
         << "  " << dest_reg(rng) << " = load.1 [array2 + " << d << "]\n";
      used += 3;
    }
    guarded_next = false;
    os << "  " << dest_reg(rng) << " = mov " << reg(rng) << "\n";
    const std::size_t n = pick(rng, per_block);
    for (std::size_t k = 0; k < n && used + 3 < budget; ++k) used += emit_body(rng, os);
    if (b + 1 == blocks) {
      os << "  halt\n";
    } else if (branches_left > 0 && (chance(rng, 0.7) || blocks - b - 1 <= branches_left)) {
      --branches_left;
      const std::string c = dest_reg(rng);
      if (chance(rng, 0.3)) {
        // Bounds check guarding a gadget in the next block.
        os << "  " << c << " = lt r0, 16\n";
        os << "  br " << c << ", b" << b + 1 << ", b" << b + 1 + pick(rng, blocks - b - 1) << "\n";
        guarded_next = true;
        continue;
      }
      if (chance(rng, 0.5)) os << "  " << c << " = lt " << index_reg(rng) << ", " << reg(rng) << "\n";
      else os << "  " << c << " = lt " << index_reg(rng) << ", 16\n";
      const std::size_t t1 = b + 1 + pick(rng, blocks - b - 1);
      const std::size_t t2 = b + 1 + pick(rng, blocks - b - 1);
      os << "  br " << c << ", b" << t1 << ", b" << t2 << "\n";
      continue;
    } else if (chance(rng, 0.5)) {
      os << "  jmp b" << b + 1 + pick(rng, blocks - b - 1) << "\n";
    }  // else fall through
  }
  return os.str();
}

Program random_program(Rng& rng, const FuzzOptions& opts) {
  return parse_program(random_program_text(rng, opts));
}

SimInput random_input(Rng& rng, std::size_t calls) {
  SimInput in;
  in.memory.push_back(MemoryInit{"sizes", 0, {16}});
  auto& bytes = in.sources["read"];
  for (std::size_t c = 0; c < calls; ++c) {
    const std::size_t band = pick(rng, 3);
    const std::uint64_t v = band == 0 ? pick(rng, 16) : band == 1 ? 64 + pick(rng, 64) : pick(rng, 256);
    for (int k = 0; k < 8; ++k) bytes.push_back(k == 0 ? static_cast<std::uint8_t>(v) : 0);
  }
  return in;
}

Program random_cfg_program(Rng& rng, std::size_t max_blocks) {
  const std::size_t blocks = 1 + pick(rng, max_blocks);
  std::ostringstream os;
  for (std::size_t b = 0; b < blocks; ++b) {
    os << "b" << b << ":\n";
    const std::size_t n = 1 + pick(rng, 4);
    for (std::size_t k = 0; k < n; ++k) {
      if (chance(rng, 0.1)) os << "  fence\n";
      else os << "  r" << pick(rng, 3) << " = add r" << pick(rng, 3) << ", 1\n";
    }
    const std::size_t kind = pick(rng, 8);
    if (b + 1 == blocks) {
      os << (kind < 5 ? "  halt\n" : "  jmp b" + std::to_string(pick(rng, blocks)) + "\n");
    } else if (kind < 4) {
      os << "  br r0, b" << pick(rng, blocks) << ", b" << pick(rng, blocks) << "\n";
    } else if (kind < 5) {
      os << "  jmp b" << pick(rng, blocks) << "\n";
    } else if (kind < 6) {
      os << "  halt\n";
    }  // else fall through
  }
  return parse_program(os.str());
}

std::string spliced_program_text(Rng& rng, std::size_t benign_instructions, std::size_t k) {
  // Benign code never calls out, so nothing in it is tainted on its own.
  std::vector<std::size_t> cuts;
  for (std::size_t j = 0; j < k; ++j) cuts.push_back(pick(rng, benign_instructions + 1));
  std::sort(cuts.begin(), cuts.end());

  std::ostringstream os;
  os << kLitmusHeader << "entry:\n  c0 = mov 0\n";
  std::size_t next_cut = 0, diamond = 0;
  for (std::size_t i = 0; i <= benign_instructions; ++i) {
    while (next_cut < cuts.size() && cuts[next_cut] == i) {
      const std::string g = "g" + std::to_string(next_cut);
      os << "  jmp " << g << "_check\n"
         << g << "_check:\n"
         << "  call read -> " << g << "x\n"
         << "  " << g << "n = load [sizes]\n"
         << "  " << g << "ok = lt " << g << "x, " << g << "n\n"
         << "  br " << g << "ok, " << g << "_body, " << g << "_join\n"
         << g << "_body:\n"
         << "  " << g << "v = load.1 [array1 + " << g << "x]\n"
         << "  " << g << "i = shl " << g << "v, 9\n"
         << "  " << g << "y = load.1 [array2 + " << g << "i]\n"
         << "  jmp " << g << "_join\n"
         << g << "_join:\n";
      ++next_cut;
    }
    if (i == benign_instructions) break;
    if (chance(rng, 0.08)) {
      // Diamond on public data.
      const std::string d = "d" + std::to_string(diamond++);
      os << "  " << d << "c = load [state]\n"
         << "  br " << d << "c, " << d << "_a, " << d << "_b\n"
         << d << "_a:\n  c1 = add c1, 1\n  jmp " << d << "_m\n"
         << d << "_b:\n  c2 = add c2, 2\n  jmp " << d << "_m\n"
         << d << "_m:\n";
    }
    switch (pick(rng, 4)) {
      case 0: os << "  c" << pick(rng, 4) << " = add c" << pick(rng, 4) << ", " << pick(rng, 100) << "\n"; break;
      case 1: os << "  c" << pick(rng, 4) << " = load [state + " << 8 * pick(rng, 8) << "]\n"; break;
      case 2: os << "  store [state + " << 8 * pick(rng, 8) << "], c" << pick(rng, 4) << "\n"; break;
      default: os << "  c" << pick(rng, 4) << " = load.1 [array1 + " << pick(rng, 16) << "]\n"; break;
    }
  }
  os << "  halt\n";
  return os.str();
}

}  // namespace specguard::testing
