#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sentinel/config.hpp"
#include "sentinel/events.hpp"
#include "sentinel/synth.hpp"

namespace sentinel {

namespace fs = std::filesystem;

// Each command throws UsageError (exit 1) or DataError (exit 2) on failure.

struct IngestArgs {
  std::vector<fs::path> inputs;  // one event stream per source; source id = file stem
  std::optional<fs::path> rules;
  Environment environment = Environment::Enterprise;
  bool strict = false;
  fs::path out;                  // window file
  std::optional<fs::path> rejects;
};
struct IngestSummary {
  std::size_t events = 0;
  std::size_t windows = 0;
  std::size_t rejects = 0;
};
IngestSummary cmd_ingest(const IngestArgs& args, const PipelineConfig& config);

struct FeaturizeArgs {
  std::vector<fs::path> windows;
  fs::path scores;
  std::optional<fs::path> sources;
  fs::path out_dataset;
  fs::path out_vocab;
};
struct FeaturizeSummary {
  std::size_t rows = 0;
  std::size_t features = 0;
  std::size_t dropped_unlabeled = 0;
  std::size_t dropped_ambiguous = 0;
  std::size_t dropped_engine = 0;  // malware rows failing engine_filter
  std::size_t removed_underrun = 0;
};
FeaturizeSummary cmd_featurize(const FeaturizeArgs& args, const PipelineConfig& config);

struct SelectArgs {
  fs::path dataset;
  std::optional<fs::path> vocab;
  fs::path out_dataset;
  fs::path out_selected;
  std::optional<fs::path> out_vocab;
};
std::size_t cmd_select(const SelectArgs& args, const PipelineConfig& config);

struct TrainArgs {
  fs::path dataset;
  fs::path out_model;
};
LRModel cmd_train(const TrainArgs& args, const PipelineConfig& config);

struct ValidateArgs {
  fs::path dataset;
  std::optional<fs::path> model;  // otherwise trained from config
  std::optional<fs::path> vocab;
  fs::path out_dir;
};
void cmd_validate(const ValidateArgs& args, const PipelineConfig& config);

struct ScoreArgs {
  fs::path model;
  fs::path vocab;
  fs::path windows;
};
struct WindowScore {
  std::string window_id;
  double p = 0.0;
  std::vector<std::pair<std::uint32_t, double>> contributions;  // feature, weight
};
std::vector<WindowScore> cmd_score(const ScoreArgs& args, const PipelineConfig& config, std::ostream& out);

SyntheticCorpusFiles cmd_synth(const SyntheticCorpusSpec& spec, const fs::path& out_dir);

std::string cmd_report(const fs::path& bundle_dir);

}  // namespace sentinel
