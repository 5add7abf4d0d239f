#include "sentinel/labeler.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <istream>
#include <ostream>

#include "sentinel/error.hpp"
#include "sentinel/util.hpp"

namespace sentinel {

namespace {
constexpr std::string_view kUnknownFamily = "UNKNOWN";
}

std::string_view to_string(SourceTag tag) {
  switch (tag) {
    case SourceTag::MAL2M: return "MAL2M";
    case SourceTag::MAL3P: return "MAL3P";
    case SourceTag::MALAPT: return "MALAPT";
    case SourceTag::UVPN: return "UVPN";
    case SourceTag::OS: return "OS";
    case SourceTag::ENTERPRISE: return "ENTERPRISE";
  }
  return "MAL2M";
}

std::optional<SourceTag> parse_source_tag(std::string_view token) {
  for (auto tag : {SourceTag::MAL2M, SourceTag::MAL3P, SourceTag::MALAPT, SourceTag::UVPN, SourceTag::OS,
                   SourceTag::ENTERPRISE}) {
    if (to_string(tag) == token) return tag;
  }
  return std::nullopt;
}

LabelDecision assign_label(const ScoreRecord& record, SourceTag source, double threshold_hi) {
  if (!(record.s >= 0.0 && record.s <= 1.0)) {
    throw DataError("sample '" + record.sample_id + "': score " + format_double(record.s) + " outside [0,1]");
  }
  switch (source) {
    case SourceTag::MAL3P:
    case SourceTag::MALAPT: return LabelDecision::Malicious;
    case SourceTag::OS:
    case SourceTag::ENTERPRISE: return LabelDecision::Benign;
    default: break;
  }
  if (record.s == 0.0) return LabelDecision::Benign;
  if (record.s >= threshold_hi) return LabelDecision::Malicious;
  return LabelDecision::Drop;
}

std::string extract_family(std::string_view family_label, bool strip_variant) {
  auto label = trim(family_label);
  if (label.empty()) return std::string(kUnknownFamily);
  std::string key(label);
  std::transform(key.begin(), key.end(), key.begin(), [](unsigned char c) { return std::tolower(c); });
  if (key == "unknown") return std::string(kUnknownFamily);
  // Type.Platform.Family[.Variant...]: keep the first three components.
  if (strip_variant && std::count(key.begin(), key.end(), '.') >= 3) {
    std::size_t cut = 0;
    for (int k = 0; k < 3; ++k) cut = key.find('.', cut) + 1;
    key.erase(cut - 1);
  }
  return key;
}

std::string family_type(std::string_view family_key) {
  if (family_key == kUnknownFamily) return std::string(kUnknownFamily);
  return std::string(family_key.substr(0, family_key.find('.')));
}

std::optional<int> sanitize_compile_year(std::optional<int> year, int min_year, int max_year) {
  if (!year || *year < min_year || *year > max_year) return std::nullopt;
  return year;
}

std::vector<ScoreRecord> read_score_file(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("score file: missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split(line, ',');
  if (header.size() < 4 || trim(header[0]) != "sample_id" || trim(header[1]) != "s" ||
      trim(header[2]) != "family_label" || trim(header[3]) != "compile_year") {
    throw DataError("score file: header must start with sample_id,s,family_label,compile_year");
  }
  std::vector<ScoreRecord> records;
  std::size_t line_number = 1;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const std::string where = "score file line " + std::to_string(line_number);
    const auto cells = split(line, ',');
    if (cells.size() < 4) throw DataError(where + ": expected at least 4 fields");
    ScoreRecord r;
    r.sample_id = std::string(trim(cells[0]));
    if (r.sample_id.empty()) throw DataError(where + ": empty sample_id");
    auto s = parse_double(cells[1]);
    if (!s) throw DataError(where + ": field s is not a number");
    r.s = *s;
    r.family_label = std::string(trim(cells[2]));
    const auto year = trim(cells[3]);
    if (!year.empty() && year != "NA") {
      auto y = parse_int(year);
      if (!y) throw DataError(where + ": field compile_year is not an integer");
      r.compile_year = static_cast<int>(*y);
    }
    std::size_t detections = 0;
    for (std::size_t c = 4; c < cells.size(); ++c) {
      const auto cell = trim(cells[c]);
      if (cell.empty()) continue;
      const auto colon = cell.rfind(':');
      if (colon == std::string_view::npos || colon == 0) throw DataError(where + ": verdict must be engine:0|1");
      const auto verdict = cell.substr(colon + 1);
      bool detected = false;
      if (verdict == "1" || verdict == "true") {
        detected = true;
      } else if (verdict != "0" && verdict != "false") {
        throw DataError(where + ": verdict must be engine:0|1");
      }
      r.verdicts[std::string(cell.substr(0, colon))] = detected;
      detections += detected ? 1 : 0;
    }
    if (!r.verdicts.empty()) {
      const double expected = static_cast<double>(detections) / static_cast<double>(r.verdicts.size());
      if (std::abs(expected - r.s) > 1e-6) {
        throw DataError(where + ": s=" + format_double(r.s) + " disagrees with verdicts (" +
                        format_double(expected) + ")");
      }
    }
    records.push_back(std::move(r));
  }
  return records;
}

void write_score_file(std::ostream& out, const std::vector<ScoreRecord>& records) {
  out << "sample_id,s,family_label,compile_year\n";
  for (const auto& r : records) {
    out << r.sample_id << ',' << format_double(r.s) << ',' << r.family_label << ','
        << (r.compile_year ? std::to_string(*r.compile_year) : std::string("NA"));
    for (const auto& [engine, detected] : r.verdicts) out << ',' << engine << ':' << (detected ? 1 : 0);
    out << '\n';
  }
}

std::map<std::string, SourceTag> read_source_tags(std::istream& in) {
  std::map<std::string, SourceTag> tags;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty() || line.front() == '#') continue;
    const auto cells = split(line, '\t');
    const auto tag = cells.size() == 2 ? parse_source_tag(trim(cells[1])) : std::nullopt;
    if (!tag) throw DataError("source tag file line " + std::to_string(line_number) + ": expected sample_id<TAB>TAG");
    tags[std::string(trim(cells[0]))] = *tag;
  }
  return tags;
}

}  // namespace sentinel
