// Machine-readable and text reports of an analysis run.
#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "specguard/analysis.hpp"

namespace specguard {

inline constexpr std::string_view kVersion = "0.1.0";

struct ReportCounts {
  std::size_t conditional_branches = 0;
  std::size_t tb = 0;
  std::size_t tb_rs = 0;
  std::size_t tb_sw = 0;
  std::size_t meltdown = 0;
  std::size_t malware = 0;
  friend bool operator==(const ReportCounts&, const ReportCounts&) = default;
};

struct Report {
  std::string version{kVersion};
  std::string program;
  TaintMode mode = TaintMode::program_dep;
  std::uint64_t sew = kDefaultSew;
  ReportCounts counts;
  std::vector<InstId> tainted_branches;
  std::vector<std::pair<InstId, InstId>> tb_rs;  // distinct pairs of V1 detections
  std::vector<std::pair<InstId, InstId>> tb_sw;  // distinct pairs of V1_1/V1_2 detections
  std::vector<Detection> detections;
  std::vector<MalwareFinding> meltdown;
  std::vector<MalwareFinding> malware;
  std::vector<std::string> warnings;

  bool has_findings() const { return !detections.empty() || !meltdown.empty() || !malware.empty(); }
  friend bool operator==(const Report&, const Report&) = default;
};

Report make_report(const Analysis& a, std::string program_name, const AnalysisOptions& opts);

enum class ReportFormat { json, text };

std::string emit_report(const Report& r, ReportFormat format);
/// Inverse of emit_report(r, json).  Throws std::runtime_error on malformed input.
Report parse_report(std::string_view json_text);

}  // namespace specguard
