#include <random>

#include "corpus.hpp"
#include "doctest.h"
#include "fuzz.hpp"
#include "oracles.hpp"
#include "specguard/analysis.hpp"

using namespace specguard;
using namespace specguard::testing;

namespace {

Analysis run(const Program& p, TaintMode mode = TaintMode::program_dep, TaintConfig config = {}) {
  AnalysisOptions o;
  o.taint = std::move(config);
  o.taint.mode = mode;
  return analyze(p, o);
}

InstId branch_in(const Program& p, const std::string& block) {
  return p.block(*p.find_block(block)).instructions.back();
}

}  // namespace

TEST_SUITE("taint") {
  TEST_CASE("mode and config parsing") {
    CHECK(parse_taint_mode("data_only") == TaintMode::data_only);
    CHECK_FALSE(parse_taint_mode("both").has_value());
    const TaintConfig c = parse_taint_config("# inputs\nsources = [recv, \"getenv\"]\nmode = data_only\n");
    CHECK(c.sources == std::vector<std::string>{"recv", "getenv"});
    CHECK(c.mode == TaintMode::data_only);
    CHECK_THROWS(parse_taint_config("colour = red\n"));
    CHECK_THROWS(parse_taint_config("sources = recv\n"));
    CHECK(TaintConfig{}.sources == default_taint_sources());
  }

  TEST_CASE("seeding") {
    const Program p = parse_program("entry:\n  call fread -> a\n  call recv -> b\n  call recv -> c\n  halt\n");
    const Cfg cfg = build_cfg(p);
    const TaintState seed = seed_taints(p, cfg, TaintConfig{});
    CHECK(seed.witness(0)->rule == TaintRule::source);
    CHECK(seed.instruction(1));
    CHECK(seed.instruction(2));
    CHECK(seed.witness(1) != seed.witness(2));
    CHECK(seed.tainted_instructions().size() == 3);
    REQUIRE(seed.warnings().size() == 1);
    CHECK(seed.warnings()[0].find("getenv") != std::string::npos);

    const TaintState none = seed_taints(p, cfg, TaintConfig{{}, TaintMode::program_dep});
    CHECK(none.tainted_instructions().empty());
    CHECK(none.value_locations().empty());
  }

  TEST_CASE("calls outside the source list are conservatively tainted") {
    const Program p = parse_program("entry:\n  call helper -> a\n  b = add a, 1\n  halt\n");
    const Analysis a = run(p);
    CHECK(a.taint.witness(0)->rule == TaintRule::opaque_call);
    CHECK(a.taint.instruction(1));
  }

  TEST_CASE("v01 chain") {
    const Program p = load_corpus_program("litmus/v01.ir");
    const Analysis a = run(p);
    CHECK(is_tainted(a.taint, 3));                 // TB
    CHECK(a.taint.address(4));                     // RS address
    CHECK(a.taint.witness(4)->rule == TaintRule::load_address);
    CHECK(a.taint.address(6));                     // LS address
    CHECK_FALSE(a.taint.address(7));               // temp
    const auto chain = a.taint.chain(3);
    REQUIRE_FALSE(chain.empty());
    CHECK(chain.front().rule == TaintRule::branch);
    CHECK(chain.back().rule == TaintRule::source);
    CHECK(chain.back().inst == 0);
  }

  TEST_CASE("v13 outer branch needs implicit flow") {
    const Program p = load_corpus_program("litmus/v13.ir");
    const InstId outer = branch_in(p, "join");
    const InstId inner = branch_in(p, "entry");
    const Analysis dep = run(p, TaintMode::program_dep);
    const Analysis data = run(p, TaintMode::data_only);
    CHECK(is_tainted(dep.taint, outer));
    CHECK_FALSE(is_tainted(data.taint, outer));
    CHECK(is_tainted(data.taint, inner));
    // The flag written under the tainted check is tainted only implicitly.
    const InstId flag = p.block(*p.find_block("yes")).instructions.front();
    CHECK(dep.taint.witness(flag)->rule == TaintRule::implicit);
    CHECK_FALSE(is_tainted(data.taint, flag));
  }

  TEST_CASE("store taints the value, not the address") {
    const Program p = parse_program(
        "region array3 @0x100 size 64\nentry:\n  call read -> r\n  store [array3 + 5], r\n  halt\n");
    const Analysis a = run(p);
    const AbstractLoc loc{"array3", AbsValue::exact(5), 1};
    CHECK(a.taint.value_at(loc));
    CHECK(is_tainted(a.taint, Entity{loc}));
    CHECK_FALSE(a.taint.address_location(loc));
    CHECK_FALSE(a.taint.address(1));
    CHECK_FALSE(a.taint.value_at(AbstractLoc{"array3", AbsValue::exact(32), 1}));
  }

  TEST_CASE("loads through tainted memory") {
    const Program p = parse_program(
        "region buf @0x100 size 64\nentry:\n  call read -> r\n  store [buf], r\n  x = load [buf]\n  y = load [buf + 8]\n  halt\n");
    const Analysis a = run(p, TaintMode::data_only);
    CHECK(a.taint.witness(2)->rule == TaintRule::load_value);
    CHECK_FALSE(a.taint.instruction(3));
  }

  TEST_CASE("unseeded program is clean") {
    const Program p = parse_program("region b @0 size 8\nentry:\n  x = load [b]\n  br x, a, c\na:\n  halt\nc:\n  halt\n");
    const Analysis a = run(p);
    CHECK(a.taint.tainted_instructions().empty());
    CHECK_FALSE(is_tainted(a.taint, 1));
    CHECK_FALSE(is_tainted(a.taint, Entity{AddressOf{0}}));
    CHECK_FALSE(is_tainted(a.taint, Entity{InstructionRef{99}}));
  }

  TEST_CASE("fuzz properties") {
    Rng rng(41);
    for (int g = 0; g < 150; ++g) {
      const Program p = random_program(rng);
      const Analysis dep = run(p, TaintMode::program_dep);
      const Analysis data = run(p, TaintMode::data_only);
      // program_dep over-approximates data_only.
      for (InstId i : data.taint.tainted_instructions()) CHECK(dep.taint.instruction(i));
      for (InstId i = 0; i < p.size(); ++i)
        if (data.taint.address(i)) CHECK(dep.taint.address(i));
      // Propagating a fixpoint again changes nothing.
      CHECK(propagate(dep.cfg, dep.du, dep.cdg, dep.taint, TaintMode::program_dep) == dep.taint);
      // Every witness premise holds.
      for (InstId i : dep.taint.tainted_instructions()) {
        const Witness& w = *dep.taint.witness(i);
        const Instruction& inst = p.instruction(i);
        switch (w.rule) {
          case TaintRule::source:
          case TaintRule::opaque_call:
            CHECK(inst.opcode == Opcode::call);
            CHECK_FALSE(w.parent.has_value());
            break;
          case TaintRule::implicit:
            REQUIRE(w.parent.has_value());
            CHECK(dep.cdg.depends_on(i, *w.parent));
            CHECK(dep.taint.instruction(*w.parent));
            break;
          default: {
            REQUIRE(w.parent.has_value());
            CHECK(dep.taint.instruction(*w.parent));
            bool reaches = false;
            for (const auto& u : dep.du.uses(i))
              reaches = reaches || std::count(u.defs.begin(), u.defs.end(), *w.parent);
            // Location taint is flow-insensitive: any aliasing tainted store counts.
            if (w.rule == TaintRule::load_value)
              reaches = p.instruction(*w.parent).opcode == Opcode::store &&
                        may_alias(*dep.du.location(*w.parent), *dep.du.location(i));
            CHECK(reaches);
          }
        }
        const auto chain = dep.taint.chain(i);
        CHECK(chain.back().inst < p.size());
        CHECK(p.instruction(chain.back().inst).opcode == Opcode::call);
      }
    }
  }

  TEST_CASE("no under-tainting against concrete byte flips") {
    Rng rng(42);
    for (int g = 0; g < 60; ++g) {
      const Program p = random_program(rng);
      const Analysis a = run(p);
      const auto v = taint_oracle_violations(p, a.taint, random_input(rng, 4));
      CHECK_MESSAGE(v.empty(), (v.empty() ? "" : v.front()) << "\n" << print_program(p));
    }
  }
}
