#include "sentinel/config.hpp"

#include <fstream>
#include <functional>
#include <sstream>

#include "sentinel/error.hpp"
#include "sentinel/util.hpp"

namespace sentinel {

namespace {

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  if constexpr (std::is_floating_point_v<T>) {
    if (auto v = parse_double(value)) return static_cast<T>(*v);
  } else {
    if (auto v = parse_int(value); v && (std::is_signed_v<T> || *v >= 0)) return static_cast<T>(*v);
  }
  throw UsageError("config key '" + key + "': bad value '" + value + "'");
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw UsageError("config key '" + key + "': expected true/false, got '" + value + "'");
}

std::string show(bool v) { return v ? "true" : "false"; }
std::string show(double v) { return format_double(v); }
template <typename T>
std::string show(T v) requires std::is_integral_v<T> { return std::to_string(v); }
std::string show(const std::string& v) { return v; }

// Field table shared by set() and to_map().
template <typename Config, typename Visitor>
void visit_fields(Config& c, Visitor&& v) {
  v("window_ms", c.window_ms);
  v("split_sandbox", c.split_sandbox);
  v("q_set", c.q_set);
  v("score_threshold", c.score_threshold);
  v("strip_variant", c.strip_variant);
  v("engine_filter", c.engine_filter);
  v("min_year", c.min_year);
  v("max_year", c.max_year);
  v("underrun_filter", c.underrun_filter);
  v("underrun_sigma", c.underrun_sigma);
  v("prefilter_threshold", c.prefilter_threshold);
  v("sketch_width", c.sketch_width);
  v("sketch_depth", c.sketch_depth);
  v("top_k", c.top_k);
  v("num_lambdas", c.num_lambdas);
  v("lambda_min_ratio", c.lambda_min_ratio);
  v("tolerance", c.tolerance);
  v("max_passes", c.max_passes);
  v("cv_folds", c.cv_folds);
  v("validation_folds", c.validation_folds);
  v("family_folds", c.family_folds);
  v("split_year", c.split_year);
  v("gaps", c.gaps);
  v("excluded_families", c.excluded_families);
  v("schemes", c.schemes);
  v("scrub_prevalence", c.scrub_prevalence);
  v("scrub_synthetic", c.scrub_synthetic);
  v("scrub_sandbox", c.scrub_sandbox);
  v("top_contributions", c.top_contributions);
  v("seed", c.seed);
  v("threads", c.threads);
}

}  // namespace

void PipelineConfig::set(const std::string& key, const std::string& value) {
  bool found = false;
  visit_fields(*this, [&](std::string_view name, auto& field) {
    if (name != key) return;
    found = true;
    using T = std::decay_t<decltype(field)>;
    if constexpr (std::is_same_v<T, bool>) {
      field = parse_bool(key, value);
    } else if constexpr (std::is_same_v<T, std::string>) {
      field = value;
    } else {
      field = parse_number<T>(key, value);
    }
  });
  if (!found) throw UsageError("unknown config key '" + key + "'");
  // Validate composite fields early.
  if (key == "q_set") (void)q_lengths();
  if (key == "gaps") (void)gap_list();
  if (key == "engine_filter") (void)engine_condition();
}

PipelineConfig PipelineConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file " + path.string());
  PipelineConfig config;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    const auto text = trim(line);
    if (text.empty() || text.front() == '#') continue;
    const auto eq = text.find('=');
    if (eq == std::string_view::npos) {
      throw UsageError(path.string() + ":" + std::to_string(line_number) + ": expected key = value");
    }
    config.set(std::string(trim(text.substr(0, eq))), std::string(trim(text.substr(eq + 1))));
  }
  return config;
}

std::map<std::string, std::string> PipelineConfig::to_map() const {
  std::map<std::string, std::string> out;
  visit_fields(*this, [&](std::string_view name, const auto& field) { out[std::string(name)] = show(field); });
  return out;
}

std::string PipelineConfig::serialize() const {
  std::ostringstream out;
  for (const auto& [k, v] : to_map()) out << k << " = " << v << '\n';
  return out.str();
}

PathConfig PipelineConfig::path_config() const {
  PathConfig p;
  p.num_lambdas = num_lambdas;
  p.min_ratio = lambda_min_ratio;
  p.tolerance = tolerance;
  p.max_passes = max_passes;
  return p;
}

QGramLengths PipelineConfig::q_lengths() const { return QGramLengths::parse(q_set); }

std::vector<int> PipelineConfig::gap_list() const {
  std::vector<int> out;
  for (auto part : split(gaps, ',')) {
    auto g = parse_int(part);
    if (!g || *g < 0) throw UsageError("gaps must be non-negative integers: '" + gaps + "'");
    out.push_back(static_cast<int>(*g));
  }
  return out;
}

std::vector<std::string> PipelineConfig::excluded_family_list() const {
  std::vector<std::string> out;
  for (auto part : split(excluded_families, ',')) {
    if (!trim(part).empty()) out.emplace_back(trim(part));
  }
  return out;
}

std::vector<std::string> PipelineConfig::scheme_list() const {
  std::vector<std::string> out;
  for (auto part : split(schemes, ',')) {
    const auto s = trim(part);
    if (s.empty()) continue;
    if (s != "random" && s != "time" && s != "family") throw UsageError("unknown scheme '" + std::string(s) + "'");
    out.emplace_back(s);
  }
  return out;
}

std::optional<std::pair<std::string, bool>> PipelineConfig::engine_condition() const {
  const auto text = trim(engine_filter);
  if (text.empty()) return std::nullopt;
  const auto colon = text.rfind(':');
  const auto verdict = colon == std::string::npos ? std::string_view() : text.substr(colon + 1);
  if (colon == 0 || (verdict != "0" && verdict != "1")) {
    throw UsageError("engine_filter must look like engine:0 or engine:1, got '" + std::string(text) + "'");
  }
  return std::make_pair(std::string(text.substr(0, colon)), verdict == "1");
}

}  // namespace sentinel
