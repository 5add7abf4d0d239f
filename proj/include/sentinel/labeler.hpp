#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sentinel {

enum class SourceTag { MAL2M, MAL3P, MALAPT, UVPN, OS, ENTERPRISE };

std::string_view to_string(SourceTag tag);
std::optional<SourceTag> parse_source_tag(std::string_view token);

struct ScoreRecord {
  std::string sample_id;
  double s = 0.0;  // detections / engines
  std::map<std::string, bool> verdicts;
  std::string family_label;
  std::optional<int> compile_year;
};

enum class LabelDecision : int { Benign = -1, Drop = 0, Malicious = 1 };

inline constexpr double kDefaultScoreThreshold = 0.3;

// Source overrides first, then s == 0 -> benign, s >= threshold -> malicious,
// anything in between is dropped. Throws DataError for s outside [0, 1].
LabelDecision assign_label(const ScoreRecord& record, SourceTag source,
                           double threshold_hi = kDefaultScoreThreshold);

// Case-folds the engine label and strips the variant component of
// Type.Platform.Family.Variant labels. Empty -> "UNKNOWN".
std::string extract_family(std::string_view family_label, bool strip_variant = true);

// Leading component of a family key, e.g. "trojan" for "trojan.win32.agent".
std::string family_type(std::string_view family_key);

inline constexpr int kMinCompileYear = 1995;
inline constexpr int kMaxCompileYear = 2014;

// nullopt means EXCLUDE (unusable for time splits only).
std::optional<int> sanitize_compile_year(std::optional<int> year, int min_year = kMinCompileYear,
                                         int max_year = kMaxCompileYear);

// CSV with header `sample_id,s,family_label,compile_year[,engine:verdict...]`.
// Trailing cells are `engine:0|1`; when present, s must equal detections / engines.
std::vector<ScoreRecord> read_score_file(std::istream& in);
void write_score_file(std::ostream& out, const std::vector<ScoreRecord>& records);

// `sample_id<TAB>TAG` lines.
std::map<std::string, SourceTag> read_source_tags(std::istream& in);

}  // namespace sentinel
