// stylo: command-line driver for the corpus -> features -> model -> report
// pipeline. Every command writes its outputs plus run_manifest.json into
// --out; on failure it writes error.json there instead.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "stylo/stylo.hpp"

namespace fs = std::filesystem;
using namespace stylo;

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  unsigned jobs = 1;
  std::string out;
  bool strict = false;

  std::string input;
  std::string matrix;
  std::string vocabulary;
  std::string model;
  std::size_t top = 10;
};

class RunLog {
 public:
  RunLog(std::string command, const Options& opt) : command_(std::move(command)), opt_(opt) {}

  void input(const fs::path& p) { inputs_[p.generic_string()] = file_hash(p); }
  void seed(std::uint64_t s) { seed_ = s; }
  void output(const fs::path& dir, const std::string& name, std::string_view content) {
    write_file_atomic(dir / name, content);
    outputs_.push_back(name);
  }

  void finish(const fs::path& dir) {
    nlohmann::json j = {{"command", command_},
                        {"config", opt_.config},
                        {"seed", seed_ ? nlohmann::json(*seed_) : nlohmann::json(nullptr)},
                        {"version", STYLO_VERSION},
                        {"inputs", inputs_},
                        {"outputs", outputs_},
                        {"out", opt_.out}};
    write_file_atomic(dir / "run_manifest.json", j.dump(2) + "\n");
  }

 private:
  std::string command_;
  const Options& opt_;
  std::optional<std::uint64_t> seed_;
  std::map<std::string, std::string> inputs_;
  std::vector<std::string> outputs_;
};

nlohmann::json load_config(const Options& opt, RunLog& log) {
  if (opt.config.empty()) return nlohmann::json::object();
  log.input(opt.config);
  return parse_config(read_file(opt.config));
}

fs::path out_dir(const Options& opt) {
  if (opt.out.empty()) throw Error(ErrorCode::BadConfig, "--out is required");
  return opt.out;
}

std::vector<AnnotatedDocument> read_corpus(const fs::path& path, std::size_t max_sentences, bool strict, RunLog& log) {
  log.input(path);
  return load_annotated_corpus(path, max_sentences, strict);
}

// ---------------------------------------------------------------------------

void cmd_preprocess(const Options& opt) {
  RunLog log("preprocess", opt);
  const auto cfg = load_config(opt, log);
  ValidationRules rules;
  rules.min_chars = config_get<std::size_t>(cfg, "preprocess", "min_chars", rules.min_chars);
  rules.min_sentences = config_get<std::size_t>(cfg, "preprocess", "min_sentences", rules.min_sentences);
  rules.max_sentences = config_get<std::size_t>(cfg, "preprocess", "max_sentences", rules.max_sentences);
  rules.reference_markers =
      config_get<std::vector<std::string>>(cfg, "preprocess", "reference_markers", rules.reference_markers);
  log.input(opt.input);
  const auto docs = parse_manifest(read_file(opt.input), opt.strict);
  const auto result = preprocess(docs, rules);

  std::string report = "id,reason\n";
  for (const auto& r : result.rejected) report += csv_field(r.id) + ',' + std::string(to_string(r.reason)) + '\n';
  const auto dir = out_dir(opt);
  log.output(dir, "manifest.jsonl", serialize_manifest(result.accepted));
  log.output(dir, "rejections.csv", report);
  log.finish(dir);
  std::cerr << result.accepted.size() << " accepted, " << result.rejected.size() << " rejected\n";
}

void cmd_featurize(const Options& opt) {
  RunLog log("featurize", opt);
  const auto cfg = load_config(opt, log);
  const auto features = feature_config_from(cfg);
  const auto docs = read_corpus(opt.input, config_get<std::size_t>(cfg, "", "max_sentences", 18), opt.strict, log);
  FeatureVocabulary vocab;
  if (!opt.vocabulary.empty()) {
    log.input(opt.vocabulary);
    vocab = vocabulary_from_json(nlohmann::json::parse(read_file(opt.vocabulary)), features);
  } else {
    vocab = build_vocabulary(docs, features, opt.jobs);
  }
  const auto dir = out_dir(opt);
  log.output(dir, "matrix.csv", matrix_csv(build_matrix(docs, vocab, opt.jobs)));
  log.output(dir, "vocabulary.json", vocabulary_json(vocab).dump(1) + "\n");
  log.finish(dir);
}

void cmd_train(const Options& opt) {
  RunLog log("train", opt);
  const auto cfg = load_config(opt, log);
  const auto settings = model_settings_from(cfg);
  const std::uint64_t seed = opt.seed.value_or(config_get<std::uint64_t>(cfg, "", "seed", 0));
  log.seed(seed);
  log.input(opt.matrix);
  const FeatureMatrix m = parse_matrix_csv(read_file(opt.matrix));

  std::vector<std::string> classes(m.labels.begin(), m.labels.end());
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  if (classes.size() < 2) throw Error(ErrorCode::MissingClass, "training needs at least two classes");
  std::vector<std::size_t> y;
  for (const auto& l : m.labels) {
    y.push_back(static_cast<std::size_t>(std::lower_bound(classes.begin(), classes.end(), l) - classes.begin()));
  }

  std::string fingerprint;
  if (!opt.vocabulary.empty()) {
    log.input(opt.vocabulary);
    const auto vocab = vocabulary_from_json(nlohmann::json::parse(read_file(opt.vocabulary)));
    if (vocab.names() != m.feature_names) {
      throw Error(ErrorCode::VocabularyMismatch, "matrix columns differ from the vocabulary");
    }
    fingerprint = vocab.fingerprint();
  } else {
    std::vector<FeatureKey> keys;
    for (const auto& n : m.feature_names) keys.push_back(parse_feature_name(n));
    fingerprint = FeatureVocabulary(keys, std::vector<std::size_t>(keys.size(), 0)).fingerprint();
  }

  const MatrixView X(m);
  TreeEnsemble model;
  if (settings.type == ModelType::Cart) {
    model = train_cart(X, y, classes.size(), settings.cart);
  } else {
    BoostConfig b = settings.boost;
    b.num_class = classes.size();
    b.seed = seed;
    model = train_gbdt(X, y, b);
  }
  model.classes = classes;
  model.vocabulary_fingerprint = fingerprint;
  const auto dir = out_dir(opt);
  log.output(dir, "model.json", save_model_string(model));
  log.finish(dir);
}

void write_cv(RunLog& log, const fs::path& dir, const CvResult& cv, const std::string& prefix) {
  log.output(dir, prefix + "metrics.csv", fold_metrics_csv(cv));
  log.output(dir, prefix + "confusion.csv", confusion_csv(cv.pooled, cv.classes));
  log.output(dir, prefix + "confusion_normalized.csv", matrix_of_reals_csv(normalize_rows(cv.pooled), cv.classes));
  if (auto ranking = shap_ranking(cv)) {
    log.output(dir, prefix + "shap_ranking.csv", ranking_csv(*ranking));
    log.output(dir, prefix + "shap_ranking.svg", ranking_svg(*ranking, 10));
  }
  for (const auto& f : cv.folds) {
    if (!f.model) continue;
    char name[32];
    std::snprintf(name, sizeof name, "fold_%02zu/", f.fold);
    log.output(dir, "models/" + prefix + name + "model.json", save_model_string(f.model->model));
    log.output(dir, "models/" + prefix + name + "vocabulary.json", vocabulary_json(f.model->vocabulary).dump(1) + "\n");
  }
}

std::vector<TrainedModel> load_fold_models(const fs::path& dir, RunLog& log) {
  std::vector<fs::path> folds;
  if (!fs::is_directory(dir)) throw Error(ErrorCode::IoError, "model directory not found: " + dir.string());
  for (const auto& e : fs::directory_iterator(dir)) {
    if (fs::exists(e.path() / "model.json")) folds.push_back(e.path());
  }
  if (fs::exists(dir / "model.json")) folds.push_back(dir);
  std::sort(folds.begin(), folds.end());
  std::vector<TrainedModel> models;
  for (const auto& f : folds) {
    log.input(f / "model.json");
    log.input(f / "vocabulary.json");
    TrainedModel tm;
    tm.model = load_model(f / "model.json");
    tm.vocabulary = vocabulary_from_json(nlohmann::json::parse(read_file(f / "vocabulary.json")));
    check_vocabulary(tm.model, tm.vocabulary);
    models.push_back(std::move(tm));
  }
  if (models.empty()) throw Error(ErrorCode::BadConfig, "no model.json under " + dir.string());
  return models;
}

void cmd_evaluate(const Options& opt) {
  RunLog log("evaluate", opt);
  if (opt.config.empty()) throw Error(ErrorCode::BadConfig, "evaluate needs --config");
  const auto cfg = load_config(opt, log);
  ExperimentConfig ec = experiment_config_from(cfg, fs::path(opt.config).parent_path());
  if (opt.seed) ec.settings.seed = *opt.seed;
  if (opt.jobs > 1) ec.settings.jobs = opt.jobs;
  if (!opt.out.empty()) ec.out_dir = opt.out;
  if (ec.out_dir.empty()) throw Error(ErrorCode::BadConfig, "no output directory (--out or output.dir)");
  log.seed(ec.settings.seed);
  const auto docs = read_corpus(ec.corpus, ec.max_sentences, opt.strict, log);
  const fs::path& dir = ec.out_dir;

  nlohmann::json summary;
  switch (ec.kind) {
    case ExperimentKind::Binary: {
      const auto r = run_binary(docs, ec.class_a, ec.class_b, ec.settings);
      write_cv(log, dir, r.cv, "");
      summary = {{"kind", "binary"}, {"mean_accuracy", r.mean_accuracy}, {"cv", cv_json(r.cv)}};
      break;
    }
    case ExperimentKind::Pairwise: {
      const auto r = run_pairwise(docs, ec.classes, ec.settings);
      log.output(dir, "pairwise_accuracy.csv", pairwise_csv(r));
      nlohmann::json pairs = nlohmann::json::array();
      for (const auto& p : r.pairs) {
        pairs.push_back({{"class_a", p.class_a},
                         {"class_b", p.class_b},
                         {"mean_accuracy", p.mean_accuracy},
                         {"cv", cv_json(p.cv)}});
        write_cv(log, dir, p.cv, p.class_a + "__" + p.class_b + "_");
      }
      summary = {{"kind", "pairwise"}, {"classes", r.classes}, {"pairs", std::move(pairs)}};
      break;
    }
    case ExperimentKind::Multiclass: {
      const auto r = run_multiclass(docs, ec.classes, ec.settings);
      write_cv(log, dir, r.cv, "");
      summary = {{"kind", "multiclass"}, {"mean_mcc", r.mean_mcc},   {"min_mcc", r.min_mcc},
                 {"max_mcc", r.max_mcc}, {"dummy_mcc", r.dummy_mcc}, {"cv", cv_json(r.cv)}};
      break;
    }
    case ExperimentKind::LeaveOneOut: {
      const auto r = leave_one_generator_out(docs, ec.held_out, ec.human, ec.settings);
      write_cv(log, dir, r.cv, "");
      std::string csv = "fold,validation_recall,test_recall\n";
      for (std::size_t f = 0; f < r.test_recall.size(); ++f) {
        csv += std::to_string(f) + ',' + format_double(r.validation_recall[f]) + ',' + format_double(r.test_recall[f]) +
               '\n';
      }
      csv += "mean," + format_double(r.validation.mean) + ',' + format_double(r.test.mean) + '\n';
      csv += "sd," + format_double(r.validation.sd) + ',' + format_double(r.test.sd) + '\n';
      log.output(dir, "recall.csv", csv);
      summary = {{"kind", "logo"},
                 {"held_out", r.held_out},
                 {"human", r.human},
                 {"validation_recall", {{"mean", r.validation.mean}, {"sd", r.validation.sd}}},
                 {"test_recall", {{"mean", r.test.mean}, {"sd", r.test.sd}}},
                 {"cv", cv_json(r.cv)}};
      break;
    }
    case ExperimentKind::External: {
      const auto models = load_fold_models(ec.model_dir, log);
      const auto r = eval_external(models, docs, ec.as_class);
      std::string csv = "model,accuracy,mcc,macro_f1";
      for (const auto& c : r.classes) csv += ",recall_" + csv_field(c);
      csv += '\n';
      nlohmann::json per_model = nlohmann::json::array();
      for (std::size_t i = 0; i < r.per_model.size(); ++i) {
        const auto& m = r.per_model[i];
        csv += std::to_string(i) + ',' + format_double(m.accuracy) + ',' + format_double(m.mcc) + ',' +
               format_double(m.macro_f1);
        for (double v : m.recall) csv += ',' + format_double(v);
        csv += '\n';
        per_model.push_back(metrics_json(m));
      }
      log.output(dir, "external_metrics.csv", csv);
      summary = {{"kind", "external"},
                 {"classes", r.classes},
                 {"single_class", r.single_class},
                 {"per_model", per_model},
                 {"mean_accuracy", r.mean_accuracy},
                 {"mean_macro_f1", r.mean_macro_f1},
                 {"mean_mcc", r.mean_mcc}};
      if (r.single_class) summary["recall"] = {{"mean", r.mean_recall.mean}, {"sd", r.mean_recall.sd}};
      break;
    }
  }
  summary["seed"] = ec.settings.seed;
  log.output(dir, "metrics.json", summary.dump(2) + "\n");
  log.finish(dir);
}

void cmd_explain(const Options& opt) {
  RunLog log("explain", opt);
  const auto cfg = load_config(opt, log);
  log.input(opt.model);
  const TreeEnsemble model = load_model(opt.model);
  if (opt.vocabulary.empty()) throw Error(ErrorCode::BadConfig, "explain needs --vocabulary");
  log.input(opt.vocabulary);
  const auto vocab = vocabulary_from_json(nlohmann::json::parse(read_file(opt.vocabulary)));
  check_vocabulary(model, vocab);
  const auto docs = read_corpus(opt.input, config_get<std::size_t>(cfg, "", "max_sentences", 18), opt.strict, log);

  const auto outputs = output_names(model);
  std::vector<ShapExplanation> explanations(docs.size());
  std::vector<std::vector<double>> rows(docs.size());
  std::vector<std::size_t> predicted(docs.size());
  parallel_for(docs.size(), opt.jobs, [&](std::size_t i) {
    rows[i] = vectorize(docs[i], vocab);
    explanations[i] = tree_shap(model, vocab, rows[i], docs[i].id);
    predicted[i] = predict_label(model, rows[i]);
  });

  nlohmann::json all = nlohmann::json::array();
  std::vector<SpanReport> reports;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    nlohmann::json e = explanation_json(explanations[i], vocab.names());
    e["outputs"] = outputs;
    e["predicted"] = model.classes[predicted[i]];
    all.push_back(std::move(e));

    // Highlight the document's strongest features toward the predicted class
    // (the single margin of a binary model).
    const std::size_t out = outputs.size() == 1 ? 0 : predicted[i];
    const auto& vals = explanations[i].values[out];
    std::vector<std::size_t> order;
    for (std::size_t f = 0; f < vals.size(); ++f) {
      if (vals[f] != 0.0) order.push_back(f);
    }
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return std::abs(vals[a]) > std::abs(vals[b]); });
    order.resize(std::min(order.size(), opt.top));
    std::vector<WeightedFeature> weighted;
    for (auto f : order) weighted.push_back({vocab.keys()[f], vals[f]});
    reports.push_back(highlight(docs[i], weighted));
  }

  const FoldExplanations fold{vocab.names(), outputs, explanations};
  nlohmann::json spans = nlohmann::json::array();
  for (const auto& r : reports) spans.push_back(span_report_json(r));
  const auto dir = out_dir(opt);
  log.output(dir, "explanations.json", all.dump(1) + "\n");
  log.output(dir, "ranking.csv", ranking_csv(aggregate(std::span<const FoldExplanations>(&fold, 1))));
  log.output(dir, "spans.json", spans.dump(1) + "\n");
  log.output(dir, "spans.html", span_report_html(reports));

  PlotData plot{vocab.names(), explanations, rows, {}};
  for (const auto& d : docs) plot.doc_classes.push_back(d.class_label);
  for (std::size_t k = 0; k < outputs.size(); ++k) {
    const std::string suffix = outputs.size() == 1 ? "" : "_" + outputs[k];
    log.output(dir, "shap_summary" + suffix + "_by_class.svg",
               shap_summary_svg(plot, k, opt.top, PlotColor::ByClass));
    log.output(dir, "shap_summary" + suffix + "_by_value.svg",
               shap_summary_svg(plot, k, opt.top, PlotColor::ByFeatureValue));
  }
  log.output(dir, "ranking.svg", ranking_svg(aggregate(std::span<const FoldExplanations>(&fold, 1)), opt.top));
  log.finish(dir);
}

void cmd_stats(const Options& opt) {
  RunLog log("stats", opt);
  const auto cfg = load_config(opt, log);
  const auto docs = read_corpus(opt.input, config_get<std::size_t>(cfg, "", "max_sentences", 0), opt.strict, log);
  const auto dir = out_dir(opt);
  log.output(dir, "stats.csv", stats_csv(corpus_stats(docs)));
  log.finish(dir);
}

void write_error(const Options& opt, const std::string& command, const std::string& code, const std::string& message) {
  std::cerr << "stylo " << command << ": " << message << "\n";
  if (opt.out.empty()) return;
  try {
    const nlohmann::json j = {{"command", command}, {"code", code}, {"message", message}};
    write_file_atomic(fs::path(opt.out) / "error.json", j.dump(2) + "\n");
  } catch (...) {
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stylometric machine-generated text detection toolkit"};
  app.require_subcommand(1);
  Options opt;
  std::uint64_t seed = 0;
  app.add_option("--config", opt.config, "Experiment or stage config (TOML)");
  auto* seed_opt = app.add_option("--seed", seed, "Seed overriding the config");
  app.add_option("--jobs", opt.jobs, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--out", opt.out, "Output directory");
  app.add_flag("--strict", opt.strict, "Reject unknown manifest fields");
  app.set_version_flag("--version", STYLO_VERSION);

  auto* pre = app.add_subcommand("preprocess", "Clean and validate a raw manifest");
  pre->add_option("--in", opt.input, "Manifest (JSONL)")->required();
  auto* feat = app.add_subcommand("featurize", "Build a vocabulary and feature matrix");
  feat->add_option("--in", opt.input, "Annotated corpus (.conllu or .jsonl manifest)")->required();
  feat->add_option("--vocabulary", opt.vocabulary, "Reuse this vocabulary instead of building one");
  auto* train = app.add_subcommand("train", "Train a model on a feature matrix");
  train->add_option("--matrix", opt.matrix, "Feature matrix CSV")->required();
  train->add_option("--vocabulary", opt.vocabulary, "Vocabulary JSON the matrix was built with");
  auto* eval = app.add_subcommand("evaluate", "Run the experiment described by --config");
  auto* expl = app.add_subcommand("explain", "SHAP explanations and span reports");
  expl->add_option("--model", opt.model, "Model JSON")->required();
  expl->add_option("--vocabulary", opt.vocabulary, "Vocabulary JSON")->required();
  expl->add_option("--in", opt.input, "Annotated corpus to explain")->required();
  expl->add_option("--top", opt.top, "Features highlighted per document and plotted");
  auto* stats = app.add_subcommand("stats", "Per-class corpus statistics");
  stats->add_option("--in", opt.input, "Annotated corpus")->required();

  for (auto* sub : {pre, feat, train, eval, expl, stats}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  if (*seed_opt) opt.seed = seed;

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    if (command == "preprocess") cmd_preprocess(opt);
    if (command == "featurize") cmd_featurize(opt);
    if (command == "train") cmd_train(opt);
    if (command == "evaluate") cmd_evaluate(opt);
    if (command == "explain") cmd_explain(opt);
    if (command == "stats") cmd_stats(opt);
  } catch (const Error& e) {
    write_error(opt, command, std::string(to_string(e.code())), e.what());
    return is_validation_error(e.code()) ? 2 : 3;
  } catch (const nlohmann::json::exception& e) {
    write_error(opt, command, "BadJson", e.what());
    return 2;
  } catch (const std::exception& e) {
    write_error(opt, command, "Internal", e.what());
    return 3;
  }
  return 0;
}
