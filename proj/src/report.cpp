#include "sentinel/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "sentinel/error.hpp"
#include "sentinel/labeler.hpp"
#include "sentinel/util.hpp"

namespace sentinel {

namespace fs = std::filesystem;

LRModel train_model(const Dataset& dataset, std::span<const std::size_t> rows, const PipelineConfig& config) {
  const Dataset train = dataset.subset(rows);
  return cv_select_lambda(train.matrix, train.labels, config.cv_folds, config.path_config(), config.seed).model;
}

Panel make_panel(std::string scheme, std::string fold, std::vector<double> scores, std::vector<std::int8_t> labels,
                 std::vector<std::string> malware_types) {
  Panel p;
  p.scheme = std::move(scheme);
  p.fold = std::move(fold);
  p.curve = roc_curve(scores, labels);
  p.scores = std::move(scores);
  p.labels = std::move(labels);
  p.malware_types = std::move(malware_types);
  return p;
}

namespace {

struct PanelData {
  std::vector<double> scores;
  std::vector<std::int8_t> labels;
  std::vector<std::string> types;

  void append(const PanelData& other) {
    scores.insert(scores.end(), other.scores.begin(), other.scores.end());
    labels.insert(labels.end(), other.labels.begin(), other.labels.end());
    types.insert(types.end(), other.types.begin(), other.types.end());
  }
};

std::string type_of(const Dataset& ds, std::size_t row) {
  return ds.labels[row] > 0 ? family_type(ds.meta[row].family) : std::string();
}

class Evaluator {
 public:
  Evaluator(const Dataset& ds, const PipelineConfig& cfg, ValidationReport& report) : ds_(ds), cfg_(cfg), report_(report) {
    for (std::size_t i = 0; i < ds.rows(); ++i) {
      if (ds.meta[i].environment == Environment::Enterprise) enterprise_.push_back(i);
    }
  }

  PanelData sandbox_side(const LRModel& model, std::span<const std::size_t> train, std::span<const std::size_t> test) {
    const LRModel used = cfg_.scrub_sandbox ? scrub(model, train, false) : model;
    PanelData d;
    for (auto i : test) {
      d.scores.push_back(predict_proba(used, ds_.matrix.row(i)));
      d.labels.push_back(ds_.labels[i]);
      d.types.push_back(type_of(ds_, i));
    }
    return d;
  }

  PanelData synthetic_side(const LRModel& model, std::span<const std::size_t> train, std::span<const std::size_t> test) {
    std::vector<std::size_t> malware;
    for (auto i : test) {
      if (ds_.labels[i] > 0) malware.push_back(i);
    }
    const auto synth = build_synthetic_test(ds_, malware, enterprise_);
    const LRModel used = cfg_.scrub_synthetic ? scrub(model, train, true) : model;
    PanelData d;
    d.scores = predict_proba(used, synth.matrix);
    d.labels = synth.labels;
    for (std::size_t t = 0; t < synth.labels.size(); ++t) d.types.push_back(synth.labels[t] > 0 ? type_of(ds_, synth.source_rows[t]) : "");
    return d;
  }

  void add(const std::string& scheme, const std::string& fold, const PanelData& d) {
    report_.panels.push_back(make_panel(scheme, fold, d.scores, d.labels, d.types));
  }

 private:
  LRModel scrub(const LRModel& model, std::span<const std::size_t> train, bool record) {
    std::vector<std::size_t> benign;
    for (auto i : train) {
      if (ds_.labels[i] < 0 && ds_.meta[i].environment == Environment::Sandbox) benign.push_back(i);
    }
    auto result = scrub_environment_features(model, ds_.matrix, benign, cfg_.scrub_prevalence);
    if (record) report_.scrubbed.push_back(result.removed);
    return result.model;
  }

  const Dataset& ds_;
  const PipelineConfig& cfg_;
  ValidationReport& report_;
  std::vector<std::size_t> enterprise_;
};

void add_type_breakdown(ValidationReport& report, const Panel& panel) {
  std::set<std::string> types;
  for (const auto& t : panel.malware_types) {
    if (!t.empty()) types.insert(t);
  }
  for (const auto& type : types) {
    std::vector<double> scores;
    std::vector<std::int8_t> labels;
    std::size_t count = 0;
    for (std::size_t i = 0; i < panel.scores.size(); ++i) {
      const bool keep = panel.labels[i] < 0 || panel.malware_types[i] == type;
      if (!keep) continue;
      scores.push_back(panel.scores[i]);
      labels.push_back(panel.labels[i]);
      count += panel.labels[i] > 0 ? 1 : 0;
    }
    const auto curve = roc_curve(scores, labels);
    report.types.push_back({panel.scheme, type, count, tpr_at_fpr(curve, 1e-2), tpr_at_fpr(curve, 1e-3)});
  }
}

void run_kfold(Evaluator& eval, const Dataset& ds, const SplitPlan& plan, const std::string& name,
               const PipelineConfig& cfg, ValidationReport& report) {
  PanelData pooled_sandbox, pooled_synthetic;
  for (std::size_t f = 0; f < plan.folds.size(); ++f) {
    const auto& fold = plan.folds[f];
    const LRModel model = train_model(ds, fold.train, cfg);
    const auto sandbox = eval.sandbox_side(model, fold.train, fold.test);
    const auto synthetic = eval.synthetic_side(model, fold.train, fold.test);
    eval.add(name + "_sandbox", std::to_string(f), sandbox);
    eval.add(name + "_synthetic", std::to_string(f), synthetic);
    pooled_sandbox.append(sandbox);
    pooled_synthetic.append(synthetic);
  }
  eval.add(name + "_sandbox", "pooled", pooled_sandbox);
  add_type_breakdown(report, report.panels.back());
  eval.add(name + "_synthetic", "pooled", pooled_synthetic);
  add_type_breakdown(report, report.panels.back());
}

}  // namespace

ValidationReport run_validation(const Dataset& dataset, const PipelineConfig& config, const LRModel& full_model) {
  ValidationReport report;
  Evaluator eval(dataset, config, report);
  for (const auto& scheme : config.scheme_list()) {
    if (scheme == "random") {
      run_kfold(eval, dataset, random_kfold_plan(dataset, config.validation_folds, config.seed), "random", config, report);
    } else if (scheme == "family") {
      const auto excluded = config.excluded_family_list();
      run_kfold(eval, dataset, family_plan(dataset, config.family_folds, excluded, config.seed), "family", config, report);
    } else if (scheme == "time") {
      const int year = config.split_year > 0 ? config.split_year
                                             : default_split_year(dataset, config.min_year, config.max_year);
      const auto gaps = config.gap_list();
      const auto plans = time_gap_plan(dataset, year, gaps, {config.min_year, config.max_year, config.seed});
      // One classifier for every gap; only the test side changes.
      const auto& train = plans.front().folds.front().train;
      const LRModel model = train_model(dataset, train, config);
      for (const auto& plan : plans) {
        const auto& fold = plan.folds.front();
        const std::string name = "time_gap" + std::to_string(plan.gap);
        eval.add(name + "_sandbox", "0", eval.sandbox_side(model, train, fold.test));
        add_type_breakdown(report, report.panels.back());
        eval.add(name + "_synthetic", "0", eval.synthetic_side(model, train, fold.test));
        add_type_breakdown(report, report.panels.back());
      }
    }
  }
  std::vector<std::size_t> malware;
  for (std::size_t i = 0; i < dataset.rows(); ++i) {
    if (dataset.labels[i] > 0) malware.push_back(i);
  }
  report.importance = feature_importance(full_model, dataset.matrix, malware);
  return report;
}

// ---------------------------------------------------------------------------

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string render_roc_svg(const std::string& scheme, const std::vector<const Panel*>& panels) {
  constexpr double kW = 520, kH = 420, kLeft = 60, kRight = 20, kTop = 40, kBottom = 50;
  constexpr double kMinLogFpr = -4.0;
  const double pw = kW - kLeft - kRight, ph = kH - kTop - kBottom;
  auto px = [&](double fpr) {
    const double l = fpr <= 0 ? kMinLogFpr : std::max(kMinLogFpr, std::log10(fpr));
    return kLeft + (l - kMinLogFpr) / -kMinLogFpr * pw;
  };
  auto py = [&](double tpr) { return kTop + (1.0 - tpr) * ph; };
  static const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                 "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << kW / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << xml_escape(scheme) << "</text>\n";
  svg << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int e = -4; e <= 0; ++e) {
    const double x = px(std::pow(10.0, e));
    svg << "<line x1=\"" << x << "\" y1=\"" << kTop << "\" x2=\"" << x << "\" y2=\"" << kTop + ph
        << "\" stroke=\"#ddd\"/>\n";
    svg << "<text x=\"" << x << "\" y=\"" << kTop + ph + 15 << "\" text-anchor=\"middle\">1e" << e << "</text>\n";
  }
  for (int t = 0; t <= 10; t += 2) {
    const double y = py(t / 10.0);
    svg << "<line x1=\"" << kLeft << "\" y1=\"" << y << "\" x2=\"" << kLeft + pw << "\" y2=\"" << y
        << "\" stroke=\"#ddd\"/>\n";
    svg << "<text x=\"" << kLeft - 5 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">" << t / 10.0 << "</text>\n";
  }
  svg << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kH - 10 << "\" text-anchor=\"middle\">false positive rate</text>\n";
  svg << "<text transform=\"rotate(-90)\" x=\"" << -(kTop + ph / 2) << "\" y=\"15\" text-anchor=\"middle\">true positive rate</text>\n";
  for (std::size_t k = 0; k < panels.size(); ++k) {
    const auto* p = panels[k];
    const bool pooled = p->fold == "pooled";
    svg << "<polyline fill=\"none\" stroke=\"" << (pooled ? "black" : colors[k % 10]) << "\" stroke-width=\""
        << (pooled ? 2 : 1) << "\" points=\"";
    double last_y = py(0.0);
    for (const auto& pt : p->curve.points) {
      // Step shape: horizontal at the previous TPR, then up.
      svg << px(pt.fpr) << ',' << last_y << ' ' << px(pt.fpr) << ',' << py(pt.tpr) << ' ';
      last_y = py(pt.tpr);
    }
    svg << "\"/>\n";
    svg << "<text x=\"" << kLeft + pw - 5 << "\" y=\"" << kTop + ph - 8 - 13.0 * static_cast<double>(k)
        << "\" text-anchor=\"end\" fill=\"" << (pooled ? "black" : colors[k % 10]) << "\">fold " << xml_escape(p->fold)
        << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

void write_report_bundle(const fs::path& dir, const ValidationReport& report, const FeatureVocabulary* vocab,
                         const PipelineConfig& config) {
  fs::create_directories(dir);
  auto summary = open_out(dir / "summary.csv");
  summary << "scheme,fold,tpr@1e-2,tpr@1e-3\n";
  std::map<std::string, std::vector<const Panel*>> by_scheme;
  for (const auto& p : report.panels) {
    by_scheme[p.scheme].push_back(&p);
    summary << p.scheme << ',' << p.fold << ',' << format_double(tpr_at_fpr(p.curve, 1e-2)) << ','
            << format_double(tpr_at_fpr(p.curve, 1e-3)) << '\n';
    auto roc = open_out(dir / ("roc_" + p.scheme + "_" + p.fold + ".csv"));
    roc << "threshold,fpr,tpr\n";
    for (const auto& pt : p.curve.points) {
      roc << format_double(pt.threshold) << ',' << format_double(pt.fpr) << ',' << format_double(pt.tpr) << '\n';
    }
    if (p.fold != "pooled") {
      auto scores = open_out(dir / ("scores_" + p.scheme + "_" + p.fold + ".csv"));
      scores << "label,score\n";
      for (std::size_t i = 0; i < p.scores.size(); ++i) {
        scores << static_cast<int>(p.labels[i]) << ',' << format_double(p.scores[i]) << '\n';
      }
    }
  }
  for (const auto& [scheme, panels] : by_scheme) {
    auto svg = open_out(dir / (scheme + ".svg"));
    svg << render_roc_svg(scheme, panels);
  }

  auto types = open_out(dir / "types.csv");
  types << "scheme,type,malware_count,tpr@1e-2,tpr@1e-3\n";
  for (const auto& t : report.types) {
    types << t.scheme << ',' << csv_field(t.type) << ',' << t.malware_count << ',' << format_double(t.tpr_1e2) << ','
          << format_double(t.tpr_1e3) << '\n';
  }

  auto importance = open_out(dir / "importance.csv");
  importance << "rank,feature,weight,malware_count,importance\n";
  for (std::size_t r = 0; r < report.importance.entries.size(); ++r) {
    const auto& e = report.importance.entries[r];
    const std::string name = vocab && e.feature < vocab->size() ? vocab->gram(e.feature).to_string()
                                                                : "f" + std::to_string(e.feature);
    importance << r + 1 << ',' << csv_field(name) << ',' << format_double(e.weight) << ',' << e.malware_count << ','
               << format_double(e.importance) << '\n';
  }
  auto weights = open_out(dir / "weights.csv");
  weights << "positive_sum,negative_sum,nonzero\n"
          << format_double(report.importance.positive_weight_sum) << ','
          << format_double(report.importance.negative_weight_sum) << ',' << report.importance.entries.size() << '\n';

  auto cfg = open_out(dir / "config.txt");
  cfg << config.serialize();
}

std::string regenerate_plots(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("not a report directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (name.rfind("roc_", 0) == 0 && entry.path().extension() == ".csv") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DataError("no roc_*.csv files in " + dir.string());

  std::vector<Panel> panels;
  for (const auto& path : files) {
    const auto stem = path.stem().string().substr(4);
    const auto cut = stem.rfind('_');
    if (cut == std::string::npos) throw DataError("unexpected ROC file name " + path.string());
    Panel p;
    p.scheme = stem.substr(0, cut);
    p.fold = stem.substr(cut + 1);
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      const auto f = split(line, ',');
      auto t = f.size() == 3 ? parse_double(f[0]) : std::nullopt;
      auto x = f.size() == 3 ? parse_double(f[1]) : std::nullopt;
      auto y = f.size() == 3 ? parse_double(f[2]) : std::nullopt;
      if (!t || !x || !y) throw DataError(path.string() + ": malformed row '" + line + "'");
      p.curve.points.push_back({*x, *y, *t});
    }
    panels.push_back(std::move(p));
  }
  std::map<std::string, std::vector<const Panel*>> by_scheme;
  std::ostringstream text;
  text << "scheme\tfold\ttpr@1e-2\ttpr@1e-3\tauc\n";
  for (const auto& p : panels) {
    by_scheme[p.scheme].push_back(&p);
    text << p.scheme << '\t' << p.fold << '\t' << format_double(tpr_at_fpr(p.curve, 1e-2)) << '\t'
         << format_double(tpr_at_fpr(p.curve, 1e-3)) << '\t' << format_double(p.curve.auc()) << '\n';
  }
  for (const auto& [scheme, group] : by_scheme) {
    auto svg = open_out(dir / (scheme + ".svg"));
    svg << render_roc_svg(scheme, group);
  }
  return text.str();
}

}  // namespace sentinel
