#include "specguard/meltdown.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <set>
#include <stdexcept>
#include <unordered_map>

namespace specguard {

void CacheGeometry::validate() const {
  if (num_sets < 1 || ways < 1 || line_size < 1)
    throw std::invalid_argument("cache geometry fields must be at least 1");
  if (!std::has_single_bit(num_sets))
    throw std::invalid_argument("number of cache sets must be a power of two");
}

CacheGeometry CacheGeometry::parse(std::string_view text) {
  CacheGeometry g;
  std::uint64_t* fields[] = {&g.num_sets, &g.ways, &g.line_size};
  std::size_t pos = 0;
  for (int k = 0; k < 3; ++k) {
    const std::size_t end = k < 2 ? text.find(':', pos) : text.size();
    if (end == std::string_view::npos)
      throw std::invalid_argument("cache geometry must be SETS:WAYS:LINESIZE");
    const std::string_view part = text.substr(pos, end - pos);
    auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), *fields[k]);
    if (ec != std::errc() || ptr != part.data() + part.size() || part.empty())
      throw std::invalid_argument("invalid cache geometry field '" + std::string(part) + "'");
    pos = end + 1;
  }
  g.validate();
  return g;
}

void check_alignment(const Program& p, const CacheGeometry& g) {
  for (const auto& r : p.regions())
    if (r.base % g.line_size != 0)
      throw std::invalid_argument("region '" + r.name + "' base is not aligned to the " +
                                  std::to_string(g.line_size) + "-byte cache line");
}

std::optional<std::uint64_t> cache_set_of(const Program& p, const CacheGeometry& g,
                                          const AbstractLoc& loc) {
  if (loc.is_unknown() || !loc.offset.is_exact()) return std::nullopt;
  const Region* r = p.find_region(loc.region);
  if (!r) return std::nullopt;
  return ((r->base + loc.offset.lo()) / g.line_size) % g.num_sets;
}

std::string_view to_string(MalwareKind k) {
  return k == MalwareKind::MELTDOWN ? "MELTDOWN" : "PRIME_PROBE";
}

std::vector<std::string> protected_regions(const Program& p, const std::vector<std::string>& extra) {
  std::vector<std::string> out;
  for (const auto& r : p.regions())
    if (r.is_protected || std::find(extra.begin(), extra.end(), r.name) != extra.end())
      out.push_back(r.name);
  return out;
}

namespace {

/// Candidate lines of an interval access are enumerated only up to this many.
constexpr std::uint64_t kMaxCandidateLines = 4096;

class Reach {
 public:
  explicit Reach(const Cfg& cfg) : cfg_(cfg) {}
  std::uint64_t distance(InstId a, InstId b) {
    auto it = cache_.find(a);
    if (it == cache_.end()) it = cache_.emplace(a, distances_from(cfg_, a)).first;
    return it->second[b];
  }
  bool operator()(InstId a, InstId b) { return a != b && distance(a, b) != kInfinity; }

 private:
  const Cfg& cfg_;
  std::unordered_map<InstId, std::vector<std::uint64_t>> cache_;
};

bool block_in_cycle(const Cfg& cfg, BlockId b) {
  std::vector<char> seen(cfg.num_blocks(), 0);
  std::vector<BlockId> stack(cfg.successors(b).begin(), cfg.successors(b).end());
  while (!stack.empty()) {
    const BlockId x = stack.back();
    stack.pop_back();
    if (x == b) return true;
    if (seen[x]) continue;
    seen[x] = 1;
    for (BlockId s : cfg.successors(x)) stack.push_back(s);
  }
  return false;
}

/// Lines of set `s` an access may touch.  Exact offsets give their own
/// lines; bounded intervals count only inside loops, where one instruction
/// can sweep several lines.
std::vector<std::uint64_t> lines_in_set(const Cfg& cfg, const DefUse& du, const CacheGeometry& g,
                                        std::uint64_t s, InstId inst) {
  const auto& loc = du.location(inst);
  if (!loc || loc->offset.is_bottom() || loc->is_anywhere()) return {};
  const Region* r = cfg.program().find_region(loc->region);
  if (!r) return {};
  const AbsValue bytes = loc->bytes();
  if (!loc->offset.is_exact() && !block_in_cycle(cfg, cfg.program().instruction(inst).block))
    return {};
  const std::uint64_t first = (r->base + bytes.lo()) / g.line_size;
  const std::uint64_t last = (r->base + bytes.hi()) / g.line_size;
  if (last - first >= kMaxCandidateLines) return {};
  std::vector<std::uint64_t> out;
  for (std::uint64_t line = first; line <= last; ++line)
    if (line % g.num_sets == s) out.push_back(line);
  return out;
}

struct Item {
  InstId first = 0;  // where the item starts executing
  InstId last = 0;   // where it ends
  std::vector<std::uint64_t> lines;
};

/// Greedy chains: from each start, repeatedly take the nearest reachable
/// item that adds a new line until ω lines are covered.
std::vector<std::vector<std::size_t>> chains(const std::vector<Item>& items, std::uint64_t ways,
                                             Reach& reach) {
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < items.size(); ++start) {
    std::vector<std::size_t> chain{start};
    std::set<std::uint64_t> lines(items[start].lines.begin(), items[start].lines.end());
    while (lines.size() < ways) {
      std::optional<std::size_t> best;
      std::uint64_t best_dist = kInfinity;
      const InstId cur = items[chain.back()].last;
      for (std::size_t j = 0; j < items.size(); ++j) {
        // Adjacent probes may share a timing read, so equality counts.
        if (cur != items[j].first && !reach(cur, items[j].first)) continue;
        if (std::all_of(items[j].lines.begin(), items[j].lines.end(),
                        [&](std::uint64_t l) { return lines.contains(l); }))
          continue;
        const std::uint64_t d = cur == items[j].first ? 0 : reach.distance(cur, items[j].first);
        if (d < best_dist) {
          best_dist = d;
          best = j;
        }
      }
      if (!best) break;
      chain.push_back(*best);
      lines.insert(items[*best].lines.begin(), items[*best].lines.end());
    }
    if (lines.size() >= ways && std::find(out.begin(), out.end(), chain) == out.end())
      out.push_back(std::move(chain));
  }
  return out;
}

std::vector<Item> access_items(const Cfg& cfg, const DefUse& du, const CacheGeometry& g,
                               std::uint64_t s) {
  std::vector<Item> items;
  for (const auto& inst : cfg.program().instructions()) {
    if (!inst.is_memory()) continue;
    auto lines = lines_in_set(cfg, du, g, s, inst.id);
    if (!lines.empty()) items.push_back({inst.id, inst.id, std::move(lines)});
  }
  return items;
}

/// Timing reads directly around `inst` in its block, with no other memory
/// access or timing read in between.
std::optional<ProbeTriplet> bracket(const Program& p, InstId inst) {
  const auto& body = p.block(p.instruction(inst).block).instructions;
  const auto pos = static_cast<std::size_t>(inst - body.front());
  auto blocks_probe = [&](InstId i) {
    const auto op = p.instruction(i).opcode;
    return op == Opcode::load || op == Opcode::store || op == Opcode::call;
  };
  std::optional<InstId> ts, te;
  for (std::size_t k = pos; k-- > 0;) {
    if (p.instruction(body[k]).opcode == Opcode::time) {
      ts = body[k];
      break;
    }
    if (blocks_probe(body[k])) break;
  }
  for (std::size_t k = pos + 1; k < body.size(); ++k) {
    if (p.instruction(body[k]).opcode == Opcode::time) {
      te = body[k];
      break;
    }
    if (blocks_probe(body[k])) break;
  }
  if (!ts || !te) return std::nullopt;
  return ProbeTriplet{*ts, inst, *te};
}

bool may_read(const AbstractLoc& loc, const std::vector<std::string>& names) {
  if (loc.offset.is_bottom() || names.empty()) return false;
  if (loc.is_unknown()) return true;
  return std::find(names.begin(), names.end(), loc.region) != names.end();
}

std::vector<std::vector<InstId>> prime_chains(const Cfg& cfg, const DefUse& du,
                                              const CacheGeometry& g, std::uint64_t s,
                                              Reach& reach) {
  const auto items = access_items(cfg, du, g, s);
  std::vector<std::vector<InstId>> out;
  for (const auto& chain : chains(items, g.ways, reach)) {
    std::vector<InstId> seq;
    for (std::size_t k : chain) seq.push_back(items[k].first);
    out.push_back(std::move(seq));
  }
  return out;
}

std::vector<std::vector<ProbeTriplet>> probe_chains(const Cfg& cfg, const DefUse& du,
                                                    const CacheGeometry& g, std::uint64_t s,
                                                    Reach& reach) {
  std::vector<Item> items;
  std::vector<ProbeTriplet> triplets;
  for (const auto& a : access_items(cfg, du, g, s)) {
    auto t = bracket(cfg.program(), a.first);
    if (!t) continue;
    items.push_back({t->t_start, t->t_end, a.lines});
    triplets.push_back(*t);
  }
  std::vector<std::vector<ProbeTriplet>> out;
  for (const auto& chain : chains(items, g.ways, reach)) {
    std::vector<ProbeTriplet> seq;
    for (std::size_t k : chain) seq.push_back(triplets[k]);
    out.push_back(std::move(seq));
  }
  return out;
}

}  // namespace

std::vector<MalwareFinding> detect_meltdown(const Cfg& cfg, const DefUse& du,
                                            const std::vector<std::string>& protected_names) {
  const Program& p = cfg.program();
  std::vector<MalwareFinding> out;
  for (const auto& l1 : p.instructions()) {
    if (l1.opcode != Opcode::load || !may_read(*du.location(l1.id), protected_names)) continue;
    const DepClosure closure(du, l1.id);
    for (const auto& im1 : p.instructions()) {
      if (!im1.is_memory() || im1.id == l1.id || !closure.contains(im1.id)) continue;
      MalwareFinding f;
      f.kind = MalwareKind::MELTDOWN;
      f.ua = l1.id;
      f.ls = im1.id;
      out.push_back(std::move(f));
    }
  }
  return out;
}

std::vector<std::vector<InstId>> detect_prime(const Cfg& cfg, const DefUse& du,
                                              const CacheGeometry& g, std::uint64_t s) {
  g.validate();
  Reach reach(cfg);
  return prime_chains(cfg, du, g, s, reach);
}

std::vector<std::vector<ProbeTriplet>> detect_probe(const Cfg& cfg, const DefUse& du,
                                                    const CacheGeometry& g, std::uint64_t s) {
  g.validate();
  Reach reach(cfg);
  return probe_chains(cfg, du, g, s, reach);
}

std::vector<MalwareFinding> detect_malware(const Cfg& cfg, const DefUse& du,
                                           const CacheGeometry& g,
                                           const std::vector<std::string>& protected_names,
                                           std::uint64_t sew) {
  g.validate();
  const Program& p = cfg.program();
  check_alignment(p, g);
  std::vector<std::string> sensitive = protected_names;
  for (const auto& r : p.regions())
    if (p.is_sensitive(r) && std::find(sensitive.begin(), sensitive.end(), r.name) == sensitive.end())
      sensitive.push_back(r.name);

  // (UA, LS) pairs satisfying the unauthorized-read condition.
  Reach reach(cfg);
  std::vector<std::pair<InstId, InstId>> secret_pairs;
  for (const auto& ua : p.instructions()) {
    if (ua.opcode != Opcode::load || !may_read(*du.location(ua.id), sensitive)) continue;
    const DepClosure closure(du, ua.id);
    for (const auto& ls : p.instructions()) {
      if (!ls.is_memory() || ls.id == ua.id || !closure.depends(AddressOf{ls.id})) continue;
      if (reach.distance(ua.id, ls.id) > sew) continue;
      secret_pairs.emplace_back(ua.id, ls.id);
    }
  }
  if (secret_pairs.empty()) return {};

  std::vector<MalwareFinding> out;
  for (std::uint64_t s = 0; s < g.num_sets; ++s) {
    const auto primes = prime_chains(cfg, du, g, s, reach);
    if (primes.empty()) continue;
    const auto probes = probe_chains(cfg, du, g, s, reach);
    if (probes.empty()) continue;
    std::optional<MalwareFinding> found;
    for (const auto& [ua, ls] : secret_pairs) {
      for (const auto& prime : primes) {
        if (!reach(prime.back(), ua)) continue;
        for (const auto& probe : probes) {
          if (!reach(ls, probe.front().t_start)) continue;
          found = MalwareFinding{MalwareKind::PRIME_PROBE, ua, ls, prime, probe, s};
          break;
        }
        if (found) break;
      }
      if (found) break;
    }
    if (found) out.push_back(std::move(*found));
  }
  return out;
}

}  // namespace specguard
