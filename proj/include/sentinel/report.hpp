#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "sentinel/config.hpp"
#include "sentinel/validation.hpp"

namespace sentinel {

// One evaluated test side: a fold of a scheme, or the pooled scores of all folds.
struct Panel {
  std::string scheme;  // e.g. random_sandbox, time_gap1_synthetic, family_sandbox
  std::string fold;    // fold index or "pooled"
  std::vector<double> scores;
  std::vector<std::int8_t> labels;
  std::vector<std::string> malware_types;  // family type per sample, empty for benign
  ROCCurve curve;
};

struct TypeBreakdown {
  std::string scheme;
  std::string type;
  std::size_t malware_count = 0;
  double tpr_1e2 = 0.0;
  double tpr_1e3 = 0.0;
};

struct ValidationReport {
  std::vector<Panel> panels;
  std::vector<TypeBreakdown> types;
  ImportanceTable importance;
  std::vector<std::vector<std::uint32_t>> scrubbed;  // removed features per trained fold model
};

// Fits lambda by internal CV on the given rows.
LRModel train_model(const Dataset& dataset, std::span<const std::size_t> rows, const PipelineConfig& config);

/// Runs every configured scheme on the sandbox side and on the synthetic
/// enterprise side, plus feature importance of `full_model` over all malware rows.
ValidationReport run_validation(const Dataset& dataset, const PipelineConfig& config, const LRModel& full_model);

Panel make_panel(std::string scheme, std::string fold, std::vector<double> scores,
                 std::vector<std::int8_t> labels, std::vector<std::string> malware_types);

/// roc_<scheme>_<fold>.csv, summary.csv, types.csv, importance.csv,
/// weights.csv, <scheme>.svg and config.txt.
void write_report_bundle(const std::filesystem::path& dir, const ValidationReport& report,
                         const FeatureVocabulary* vocab, const PipelineConfig& config);

// Self-contained SVG of every fold curve of a scheme, log-scaled FPR axis.
std::string render_roc_svg(const std::string& scheme, const std::vector<const Panel*>& panels);

// Rebuilds the SVG plots and prints a summary table from existing roc_*.csv files.
std::string regenerate_plots(const std::filesystem::path& dir);

}  // namespace sentinel
