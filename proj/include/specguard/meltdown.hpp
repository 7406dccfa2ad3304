// Meltdown signatures and Prime+Probe malware sequences.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "specguard/dependence.hpp"

namespace specguard {

struct CacheGeometry {
  std::uint64_t num_sets = 0;
  std::uint64_t ways = 0;  // ω
  std::uint64_t line_size = 0;

  /// Throws std::invalid_argument unless all fields are >= 1 and num_sets
  /// is a power of two.
  void validate() const;
  /// Parses "SETS:WAYS:LINESIZE".
  static CacheGeometry parse(std::string_view text);
  friend bool operator==(const CacheGeometry&, const CacheGeometry&) = default;
};

/// Throws std::invalid_argument naming the first region whose base is not
/// a multiple of the line size.
void check_alignment(const Program& p, const CacheGeometry& g);

/// Set index of an exact location; nullopt for interval or top offsets.
std::optional<std::uint64_t> cache_set_of(const Program& p, const CacheGeometry& g,
                                          const AbstractLoc& loc);

enum class MalwareKind { MELTDOWN, PRIME_PROBE };

std::string_view to_string(MalwareKind k);

/// ⟨t_s, inst, t_e⟩: a memory access bracketed by timing reads.
struct ProbeTriplet {
  InstId t_start = 0;
  InstId inst = 0;
  InstId t_end = 0;
  friend bool operator==(const ProbeTriplet&, const ProbeTriplet&) = default;
};

/// MELTDOWN: ua is the protected read (L1), ls the dependent access (IM1).
/// PRIME_PROBE additionally carries the prime and probe sequences and set.
struct MalwareFinding {
  MalwareKind kind = MalwareKind::MELTDOWN;
  InstId ua = 0;
  InstId ls = 0;
  std::vector<InstId> prime_seq;
  std::vector<ProbeTriplet> probe_seq;
  std::optional<std::uint64_t> cache_set;
  friend bool operator==(const MalwareFinding&, const MalwareFinding&) = default;
};

/// Names of regions treated as protected: those declared `protected` plus
/// `extra`.
std::vector<std::string> protected_regions(const Program& p, const std::vector<std::string>& extra);

/// (L1, IM1) with L1 a load that may read a protected region and IM1 a
/// memory access data-dependent on L1.
std::vector<MalwareFinding> detect_meltdown(const Cfg& cfg, const DefUse& du,
                                            const std::vector<std::string>& protected_names);

/// Minimal access sequences along a path that touch ω distinct lines of
/// set `s`.
std::vector<std::vector<InstId>> detect_prime(const Cfg& cfg, const DefUse& du,
                                              const CacheGeometry& g, std::uint64_t s);

/// Timed probe sequences covering ω distinct lines of set `s`.
std::vector<std::vector<ProbeTriplet>> detect_probe(const Cfg& cfg, const DefUse& du,
                                                    const CacheGeometry& g, std::uint64_t s);

/// Prime, then an unauthorized read feeding a dependent access within
/// `sew`, then a probe of the same set, in reachability order.  At most one
/// finding per set.
std::vector<MalwareFinding> detect_malware(const Cfg& cfg, const DefUse& du,
                                           const CacheGeometry& g,
                                           const std::vector<std::string>& protected_names,
                                           std::uint64_t sew);

}  // namespace specguard
