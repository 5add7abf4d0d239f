#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sentinel/featurize.hpp"
#include "sentinel/lr.hpp"

namespace sentinel {

/// Every knob of the pipeline. Loaded from a `key = value` file, overridden
/// by flags, and written verbatim into each report bundle.
struct PipelineConfig {
  std::int64_t window_ms = kDefaultWindowMs;
  bool split_sandbox = false;
  std::string q_set = "1,2,3";

  double score_threshold = 0.3;
  bool strip_variant = true;
  std::string engine_filter;  // "engine:0|1" keeps malware rows with that verdict; empty keeps all
  int min_year = 1995;
  int max_year = 2014;

  bool underrun_filter = true;
  double underrun_sigma = 2.0;
  std::uint64_t prefilter_threshold = 0;  // 0 disables the two-pass prefilter
  std::size_t sketch_width = 1 << 20;
  std::size_t sketch_depth = 4;

  std::size_t top_k = 50'000;

  std::size_t num_lambdas = 100;
  double lambda_min_ratio = 1e-4;
  double tolerance = 1e-7;
  std::size_t max_passes = 100'000;
  std::size_t cv_folds = 20;

  std::size_t validation_folds = 10;
  std::size_t family_folds = 10;
  int split_year = 0;  // 0 = median sanitized malware year
  std::string gaps = "0,1,2";
  std::string excluded_families = "trojan.win32.generic";
  std::string schemes = "random,time,family";
  double scrub_prevalence = 0.01;
  bool scrub_synthetic = true;
  bool scrub_sandbox = false;
  std::size_t top_contributions = 5;

  std::uint64_t seed = 1;
  int threads = 0;

  // Throws UsageError on unknown keys or unparsable values.
  void set(const std::string& key, const std::string& value);
  static PipelineConfig from_file(const std::filesystem::path& path);

  std::map<std::string, std::string> to_map() const;
  std::string serialize() const;

  PathConfig path_config() const;
  QGramLengths q_lengths() const;
  std::vector<int> gap_list() const;
  std::vector<std::string> excluded_family_list() const;
  std::vector<std::string> scheme_list() const;
  // Parsed engine_filter; nullopt when empty.
  std::optional<std::pair<std::string, bool>> engine_condition() const;
};

}  // namespace sentinel
