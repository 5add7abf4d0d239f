// sentinel: audit-log malware detection pipeline.
//
//   sentinel synth --out corpus
//   sentinel ingest --env sandbox --out sb.win corpus/sandbox/*.log
//   sentinel ingest --env enterprise --out ent.win corpus/enterprise/*.log
//   sentinel featurize --scores corpus/scores.csv --out data.tsv --vocab vocab.tsv sb.win ent.win
//   sentinel select --dataset data.tsv --out data_k.tsv --selected selected.tsv
//   sentinel train --dataset data_k.tsv --out model.txt
//   sentinel validate --dataset data_k.tsv --out report/

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <map>

#include "sentinel/commands.hpp"
#include "sentinel/error.hpp"
#include "sentinel/parallel.hpp"

using namespace sentinel;

namespace {

struct Common {
  std::string config_file;
  std::vector<std::string> overrides;  // key=value
  int threads = 0;
};

void add_common(CLI::App* cmd, Common& common) {
  cmd->add_option("--config", common.config_file, "key = value configuration file")->check(CLI::ExistingFile);
  cmd->add_option("--set", common.overrides, "override a config key (key=value, repeatable)");
  cmd->add_option("--threads", common.threads, "worker threads (default: AUDITLOG_SENTINEL_THREADS or all cores)");
}

PipelineConfig load_config(const Common& common) {
  PipelineConfig cfg = common.config_file.empty() ? PipelineConfig{} : PipelineConfig::from_file(common.config_file);
  for (const auto& kv : common.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (common.threads > 0) cfg.threads = common.threads;
  set_thread_count(cfg.threads);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Audit-log malware detection: ingest, featurize, train, validate, score"};
  app.require_subcommand(1);
  Common common;

  IngestArgs ingest;
  std::vector<std::string> ingest_inputs;
  std::string ingest_env = "enterprise", ingest_rules, ingest_rejects, ingest_out;
  auto* ingest_cmd = app.add_subcommand("ingest", "parse event streams into log windows");
  ingest_cmd->add_option("inputs", ingest_inputs, "event files (source id = file stem)")->required()->check(CLI::ExistingFile);
  ingest_cmd->add_option("--env", ingest_env, "sandbox or enterprise");
  ingest_cmd->add_option("--rules", ingest_rules, "path regularization rules (pattern<TAB>replacement)")->check(CLI::ExistingFile);
  ingest_cmd->add_flag("--strict", ingest.strict, "fail on the first malformed line");
  ingest_cmd->add_option("--rejects", ingest_rejects, "write rejected lines here");
  ingest_cmd->add_option("--out", ingest_out, "window file")->required();
  add_common(ingest_cmd, common);

  FeaturizeArgs featurize;
  std::vector<std::string> featurize_windows;
  std::string featurize_sources;
  auto* featurize_cmd = app.add_subcommand("featurize", "label windows and build the q-gram dataset");
  featurize_cmd->add_option("windows", featurize_windows, "window files")->required()->check(CLI::ExistingFile);
  featurize_cmd->add_option("--scores", featurize.scores, "score CSV")->required()->check(CLI::ExistingFile);
  featurize_cmd->add_option("--sources", featurize_sources, "sample_id<TAB>TAG file")->check(CLI::ExistingFile);
  featurize_cmd->add_option("--out", featurize.out_dataset, "dataset file")->required();
  featurize_cmd->add_option("--vocab", featurize.out_vocab, "vocabulary file")->required();
  add_common(featurize_cmd, common);

  SelectArgs select;
  std::string select_vocab, select_out_vocab;
  auto* select_cmd = app.add_subcommand("select", "keep the top_k features by |correlation|");
  select_cmd->add_option("--dataset", select.dataset)->required()->check(CLI::ExistingFile);
  select_cmd->add_option("--vocab", select_vocab)->check(CLI::ExistingFile);
  select_cmd->add_option("--out", select.out_dataset)->required();
  select_cmd->add_option("--selected", select.out_selected, "kept feature list")->required();
  select_cmd->add_option("--out-vocab", select_out_vocab);
  add_common(select_cmd, common);

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "fit the l1 logistic model with CV-chosen lambda");
  train_cmd->add_option("--dataset", train.dataset)->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--out", train.out_model)->required();
  add_common(train_cmd, common);

  ValidateArgs validate;
  std::string validate_model, validate_vocab;
  auto* validate_cmd = app.add_subcommand("validate", "run the split schemes and write a report bundle");
  validate_cmd->add_option("--dataset", validate.dataset)->required()->check(CLI::ExistingFile);
  validate_cmd->add_option("--model", validate_model, "model for feature importance (trained if absent)")->check(CLI::ExistingFile);
  validate_cmd->add_option("--vocab", validate_vocab, "names features in importance.csv")->check(CLI::ExistingFile);
  validate_cmd->add_option("--out", validate.out_dir)->required();
  add_common(validate_cmd, common);

  ScoreArgs score;
  auto* score_cmd = app.add_subcommand("score", "score log windows with a trained model");
  score_cmd->add_option("--model", score.model)->required()->check(CLI::ExistingFile);
  score_cmd->add_option("--vocab", score.vocab)->required()->check(CLI::ExistingFile);
  score_cmd->add_option("windows", score.windows)->required()->check(CLI::ExistingFile);
  add_common(score_cmd, common);

  std::string synth_spec, synth_out;
  std::vector<std::string> synth_overrides;
  auto* synth_cmd = app.add_subcommand("synth", "generate a labelled synthetic corpus");
  synth_cmd->add_option("--spec", synth_spec, "key = value corpus spec")->check(CLI::ExistingFile);
  synth_cmd->add_option("--param", synth_overrides, "override a spec key (key=value, repeatable)");
  synth_cmd->add_option("--out", synth_out)->required();

  std::string report_dir;
  auto* report_cmd = app.add_subcommand("report", "redraw plots and print the summary of a report bundle");
  report_cmd->add_option("dir", report_dir)->required()->check(CLI::ExistingDirectory);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*ingest_cmd) {
      const auto cfg = load_config(common);
      for (const auto& p : ingest_inputs) ingest.inputs.emplace_back(p);
      auto env = parse_environment(ingest_env);
      if (!env || *env == Environment::Synthetic) throw UsageError("--env must be sandbox or enterprise");
      ingest.environment = *env;
      if (!ingest_rules.empty()) ingest.rules = ingest_rules;
      if (!ingest_rejects.empty()) ingest.rejects = ingest_rejects;
      ingest.out = ingest_out;
      const auto s = cmd_ingest(ingest, cfg);
      std::cerr << "ingest: " << s.events << " events, " << s.windows << " windows, " << s.rejects << " rejects\n";
    } else if (*featurize_cmd) {
      const auto cfg = load_config(common);
      for (const auto& p : featurize_windows) featurize.windows.emplace_back(p);
      if (!featurize_sources.empty()) featurize.sources = featurize_sources;
      const auto s = cmd_featurize(featurize, cfg);
      std::cerr << "featurize: " << s.rows << " rows, " << s.features << " features; dropped " << s.dropped_unlabeled
                << " unlabelled, " << s.dropped_ambiguous << " ambiguous, " << s.removed_underrun << " under-run\n";
    } else if (*select_cmd) {
      const auto cfg = load_config(common);
      if (!select_vocab.empty()) select.vocab = select_vocab;
      if (!select_out_vocab.empty()) select.out_vocab = select_out_vocab;
      std::cerr << "select: kept " << cmd_select(select, cfg) << " features\n";
    } else if (*train_cmd) {
      const auto cfg = load_config(common);
      const auto model = cmd_train(train, cfg);
      std::cerr << "train: lambda " << model.lambda << ", " << model.weights.size() << " nonzero weights\n";
    } else if (*validate_cmd) {
      const auto cfg = load_config(common);
      if (!validate_model.empty()) validate.model = validate_model;
      if (!validate_vocab.empty()) validate.vocab = validate_vocab;
      cmd_validate(validate, cfg);
      std::cerr << "validate: report written to " << validate.out_dir << '\n';
    } else if (*score_cmd) {
      const auto cfg = load_config(common);
      cmd_score(score, cfg, std::cout);
    } else if (*synth_cmd) {
      SyntheticCorpusSpec spec = synth_spec.empty() ? SyntheticCorpusSpec{} : SyntheticCorpusSpec::from_file(synth_spec);
      for (const auto& kv : synth_overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw UsageError("--param expects key=value, got '" + kv + "'");
        spec.set(kv.substr(0, eq), kv.substr(eq + 1));
      }
      const auto files = cmd_synth(spec, synth_out);
      std::cerr << "synth: " << files.sandbox_logs.size() << " sandbox logs, " << files.enterprise_logs.size()
                << " enterprise hosts\n";
    } else if (*report_cmd) {
      std::cout << cmd_report(report_dir);
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
