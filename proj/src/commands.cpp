#include "sentinel/commands.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <ostream>

#include "sentinel/error.hpp"
#include "sentinel/io.hpp"
#include "sentinel/labeler.hpp"
#include "sentinel/report.hpp"
#include "sentinel/select.hpp"
#include "sentinel/util.hpp"

namespace sentinel {

namespace {

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return in;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

std::vector<LogWindow> load_windows(const fs::path& path) {
  auto in = open_in(path);
  try {
    return read_windows(in);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

FeatureVocabulary load_vocabulary(const fs::path& path) {
  auto in = open_in(path);
  try {
    return read_vocabulary(in);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

LRModel load_model(const fs::path& path) {
  auto in = open_in(path);
  try {
    return read_model(in);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace

IngestSummary cmd_ingest(const IngestArgs& args, const PipelineConfig& config) {
  if (args.inputs.empty()) throw UsageError("ingest: no input files");
  if (config.window_ms <= 0) throw UsageError("window_ms must be positive");
  const PathRegularizer rules = args.rules ? PathRegularizer::from_file(*args.rules) : PathRegularizer::defaults();

  IngestSummary summary;
  std::vector<LogWindow> windows;
  std::vector<std::pair<std::string, ParseReject>> rejects;
  for (const auto& path : args.inputs) {
    auto in = open_in(path);
    ParseResult parsed;
    try {
      parsed = parse_event_stream(in, rules, args.strict);
    } catch (const DataError& e) {
      throw DataError(path.string() + ": " + e.what());
    }
    for (auto& r : parsed.rejects) rejects.emplace_back(path.string(), std::move(r));
    summary.events += parsed.events.size();
    if (parsed.events.empty()) continue;
    // Events are sorted by time; equal timestamps keep file order.
    std::stable_sort(parsed.events.begin(), parsed.events.end(),
                     [](const auto& a, const auto& b) { return a.timestamp_ms < b.timestamp_ms; });
    const std::string source = path.stem().string();
    if (args.environment == Environment::Sandbox && !config.split_sandbox) {
      windows.push_back(single_window(parsed.events, source, args.environment));
    } else {
      auto w = window_stream(parsed.events, source, config.window_ms, args.environment);
      windows.insert(windows.end(), std::make_move_iterator(w.begin()), std::make_move_iterator(w.end()));
    }
  }
  summary.windows = windows.size();
  summary.rejects = rejects.size();

  auto out = open_out(args.out);
  write_windows(out, windows);
  if (args.rejects) {
    auto rej = open_out(*args.rejects);
    for (const auto& [file, r] : rejects) rej << file << '\t' << r.line_number << '\t' << r.reason << '\n';
  }
  return summary;
}

FeaturizeSummary cmd_featurize(const FeaturizeArgs& args, const PipelineConfig& config) {
  if (args.windows.empty()) throw UsageError("featurize: no window files");
  std::map<std::string, ScoreRecord> scores;
  {
    auto in = open_in(args.scores);
    try {
      for (auto& r : read_score_file(in)) scores.emplace(r.sample_id, std::move(r));
    } catch (const DataError& e) {
      throw DataError(args.scores.string() + ": " + e.what());
    }
  }
  std::map<std::string, SourceTag> tags;
  if (args.sources) {
    auto in = open_in(*args.sources);
    try {
      tags = read_source_tags(in);
    } catch (const DataError& e) {
      throw DataError(args.sources->string() + ": " + e.what());
    }
  }

  const auto engine = config.engine_condition();
  FeaturizeSummary summary;
  std::vector<LogWindow> windows;
  std::vector<std::int8_t> labels;
  std::vector<RowMeta> meta;
  for (const auto& path : args.windows) {
    for (auto& w : load_windows(path)) {
      RowMeta m;
      m.environment = w.environment;
      m.sample_id = w.window_id;
      std::int8_t label = -1;
      if (w.environment == Environment::Sandbox) {
        auto it = scores.find(w.source_id);
        if (it == scores.end()) {
          ++summary.dropped_unlabeled;
          continue;
        }
        auto tag = tags.find(w.source_id);
        const auto decision =
            assign_label(it->second, tag == tags.end() ? SourceTag::MAL2M : tag->second, config.score_threshold);
        if (decision == LabelDecision::Drop) {
          ++summary.dropped_ambiguous;
          continue;
        }
        label = static_cast<std::int8_t>(decision);
        if (label > 0 && engine) {
          auto v = it->second.verdicts.find(engine->first);
          if (v == it->second.verdicts.end() || v->second != engine->second) {
            ++summary.dropped_engine;
            continue;
          }
        }
        m.sample_id = w.source_id;
        m.compile_year = it->second.compile_year;
        if (label > 0) m.family = extract_family(it->second.family_label, config.strip_variant);
      }
      windows.push_back(std::move(w));
      labels.push_back(label);
      meta.push_back(std::move(m));
    }
  }
  if (windows.empty()) throw DataError("featurize: no labelled windows");

  FeatureVocabulary vocab;
  const Featurizer featurizer(config.q_lengths());
  const auto logs = featurizer.featurize(windows, vocab.interner());
  windows.clear();
  windows.shrink_to_fit();

  Dataset ds;
  if (config.prefilter_threshold > 0) {
    const auto& interner = vocab.interner();
    GramStream stream = [&](const std::function<void(std::uint64_t)>& sink) {
      for (const auto& log : logs) {
        for (const auto& g : log) sink(gram_key(g, interner));
      }
    };
    ApproximateCounter::Config sketch{config.sketch_width, config.sketch_depth, mix64(config.seed), false};
    const auto approved = prefilter_by_count(stream, config.prefilter_threshold, sketch);
    ds = build_dataset(logs, labels, meta, vocab,
                       [&](const PackedGram& g) { return approved.contains(gram_key(g, interner)); });
  } else {
    ds = build_dataset(logs, labels, meta, vocab, VocabMode::Build);
  }

  if (config.underrun_filter) {
    auto filtered = filter_underrun_logs(ds, config.underrun_sigma);
    summary.removed_underrun = filtered.removed_rows.size();
    ds = std::move(filtered.dataset);
  }
  summary.rows = ds.rows();
  summary.features = ds.matrix.cols();

  save_dataset(args.out_dataset, ds);
  vocab.freeze();
  auto out = open_out(args.out_vocab);
  write_vocabulary(out, vocab);
  return summary;
}

std::size_t cmd_select(const SelectArgs& args, const PipelineConfig& config) {
  if (config.top_k == 0) throw UsageError("top_k must be positive");
  const Dataset ds = load_dataset(args.dataset);
  const auto scores = uncentered_correlation(ds.matrix, ds.labels);
  const auto selection = top_k_select(scores, config.top_k);
  save_dataset(args.out_dataset, ds.select_columns(selection.kept));
  {
    auto out = open_out(args.out_selected);
    write_selection(out, selection);
  }
  if (args.out_vocab) {
    if (!args.vocab) throw UsageError("select: --out-vocab needs --vocab");
    const auto vocab = load_vocabulary(*args.vocab);
    if (vocab.size() != ds.matrix.cols()) {
      throw DataError(args.vocab->string() + ": vocabulary size " + std::to_string(vocab.size()) +
                      " does not match dataset columns " + std::to_string(ds.matrix.cols()));
    }
    auto reduced = vocab.restrict(selection.kept);
    reduced.freeze();
    auto out = open_out(*args.out_vocab);
    write_vocabulary(out, reduced);
  }
  return selection.kept.size();
}

LRModel cmd_train(const TrainArgs& args, const PipelineConfig& config) {
  const Dataset ds = load_dataset(args.dataset);
  std::vector<std::size_t> rows(ds.rows());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  const LRModel model = train_model(ds, rows, config);
  auto out = open_out(args.out_model);
  write_model(out, model);
  return model;
}

void cmd_validate(const ValidateArgs& args, const PipelineConfig& config) {
  const Dataset ds = load_dataset(args.dataset);
  LRModel model;
  if (args.model) {
    model = load_model(*args.model);
    if (model.num_features != ds.matrix.cols()) {
      throw DataError(args.model->string() + ": model has " + std::to_string(model.num_features) +
                      " features, dataset has " + std::to_string(ds.matrix.cols()));
    }
  } else {
    std::vector<std::size_t> rows(ds.rows());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    model = train_model(ds, rows, config);
  }
  std::optional<FeatureVocabulary> vocab;
  if (args.vocab) vocab = load_vocabulary(*args.vocab);
  const auto report = run_validation(ds, config, model);
  write_report_bundle(args.out_dir, report, vocab ? &*vocab : nullptr, config);
  auto out = open_out(args.out_dir / "model.txt");
  write_model(out, model);
}

std::vector<WindowScore> cmd_score(const ScoreArgs& args, const PipelineConfig& config, std::ostream& out) {
  const LRModel model = load_model(args.model);
  FeatureVocabulary vocab = load_vocabulary(args.vocab);
  if (vocab.size() != model.num_features) {
    throw DataError(args.vocab.string() + ": vocabulary size " + std::to_string(vocab.size()) +
                    " does not match model features " + std::to_string(model.num_features));
  }
  vocab.freeze();
  const auto windows = load_windows(args.windows);
  const Featurizer featurizer(config.q_lengths());
  const auto logs = featurizer.featurize_frozen(windows, vocab.interner());
  std::vector<std::int8_t> labels(windows.size(), -1);
  std::vector<RowMeta> meta(windows.size());
  const Dataset ds = build_dataset(logs, labels, meta, vocab, VocabMode::Frozen);

  std::vector<WindowScore> result;
  out << "window_id\tp\tcontributions\n";
  for (std::size_t i = 0; i < windows.size(); ++i) {
    WindowScore s;
    s.window_id = windows[i].window_id;
    const auto row = ds.matrix.row(i);
    s.p = predict_proba(model, row);
    for (auto j : row) {
      const double w = model.weight(j);
      if (w != 0.0) s.contributions.emplace_back(j, w);
    }
    std::stable_sort(s.contributions.begin(), s.contributions.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    if (s.contributions.size() > config.top_contributions) s.contributions.resize(config.top_contributions);
    out << s.window_id << '\t' << format_double(s.p) << '\t';
    for (std::size_t c = 0; c < s.contributions.size(); ++c) {
      if (c) out << " ; ";
      out << format_double(s.contributions[c].second) << '=' << vocab.gram(s.contributions[c].first).to_string();
    }
    out << '\n';
    result.push_back(std::move(s));
  }
  return result;
}

SyntheticCorpusFiles cmd_synth(const SyntheticCorpusSpec& spec, const fs::path& out_dir) {
  spec.validate();
  return generate_corpus(spec, out_dir);
}

std::string cmd_report(const fs::path& bundle_dir) { return regenerate_plots(bundle_dir); }

}  // namespace sentinel
