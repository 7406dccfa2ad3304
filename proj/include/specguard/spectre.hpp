// Spectre v1, v1.1 and v1.2 victim patterns within the speculation window.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "specguard/taint.hpp"

namespace specguard {

/// Two reorder buffers' worth of in-flight instructions.
inline constexpr std::uint64_t kDefaultSew = 448;

struct SpecWindow {
  std::uint64_t sew = kDefaultSew;
};

enum class DetectionKind { V1, V1_WEAK, V1_1, V1_2 };

std::string_view to_string(DetectionKind k);
std::optional<DetectionKind> parse_detection_kind(std::string_view text);

/// A matched victim pattern.  V1 has tb/rs/ls, V1_WEAK tb/rs, and
/// V1_1/V1_2 tb/sw.  Delta keys: tb_rs, tb_ls, rs_ls, tb_sw.  Witness keys:
/// tb, addr_rs, addr_ls, addr_sw.
struct Detection {
  DetectionKind kind = DetectionKind::V1;
  InstId tb = 0;
  std::optional<InstId> rs;
  std::optional<InstId> ls;
  std::optional<InstId> sw;
  std::map<std::string, std::uint64_t> deltas;
  std::map<std::string, std::vector<Witness>> witnesses;

  /// The instruction a fence must precede: rs or sw.
  InstId anchor() const { return rs ? *rs : *sw; }
  friend bool operator==(const Detection&, const Detection&) = default;
};

/// Sort key (tb, rs or sw, ls).
bool detection_less(const Detection& a, const Detection& b);

/// Conditional branches with a tainted condition or implicit taint.
std::vector<InstId> tainted_branches(const Cfg& cfg, const TaintState& ts);

std::vector<Detection> detect_v1(const Cfg& cfg, const TaintState& ts, const DefUse& du,
                                 SpecWindow w);
std::vector<Detection> detect_v1_weak(const Cfg& cfg, const TaintState& ts, SpecWindow w);
/// Kind is V1_2 when the store's region is readonly.
std::vector<Detection> detect_v1_1(const Cfg& cfg, const TaintState& ts, const DefUse& du,
                                   SpecWindow w);

}  // namespace specguard
