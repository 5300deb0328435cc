#include "stylo/experiments.hpp"

namespace stylo {

std::uint64_t fold_seed(std::uint64_t seed, std::size_t fold) { return CounterRng(seed, "fold").bits(fold); }

TrainedModel train_model(std::span<const AnnotatedDocument* const> train, std::span<const std::size_t> labels,
                         const std::vector<std::string>& classes, const FeatureConfig& features,
                         const ModelSettings& settings, std::uint64_t seed, unsigned jobs) {
  TrainedModel out;
  out.vocabulary = build_vocabulary(train, features, jobs);
  const FeatureMatrix m = build_matrix(train, out.vocabulary, jobs);
  const MatrixView X(m);
  if (settings.type == ModelType::Cart) {
    out.model = train_cart(X, labels, classes.size(), settings.cart);
  } else {
    BoostConfig cfg = settings.boost;
    cfg.num_class = classes.size();
    cfg.seed = seed;
    out.model = train_gbdt(X, labels, cfg);
  }
  out.model.classes = classes;
  out.model.vocabulary_fingerprint = out.vocabulary.fingerprint();
  return out;
}

Predictions predict_documents(const TrainedModel& tm, std::span<const AnnotatedDocument* const> docs, bool explain) {
  check_vocabulary(tm.model, tm.vocabulary);
  Predictions p;
  for (const auto* d : docs) {
    const auto x = vectorize(*d, tm.vocabulary);
    p.labels.push_back(predict_label(tm.model, x));
    if (explain) p.explanations.push_back(tree_shap(tm.model, tm.vocabulary, x, d->id));
  }
  return p;
}

CvResult cross_validate(std::span<const AnnotatedDocument* const> docs, std::span<const std::size_t> labels,
                        const std::vector<std::string>& classes, const ExperimentSettings& settings) {
  if (docs.size() != labels.size()) throw Error(ErrorCode::ShapeMismatch, "documents and labels differ in length");
  std::vector<std::string> ids, groups;
  for (const auto* d : docs) {
    ids.push_back(d->id);
    groups.push_back(d->term);
  }
  CvResult result;
  result.classes = classes;
  result.plan = group_kfold(ids, groups, settings.folds, settings.seed);
  result.folds.resize(result.plan.k);
  result.pooled = ConfusionMatrix(classes.size());

  parallel_for(result.plan.k, settings.jobs, [&](std::size_t f) {
    const Fold& fold = result.plan.folds[f];
    std::vector<const AnnotatedDocument*> train, test;
    std::vector<std::size_t> train_y;
    for (auto i : fold.train) {
      train.push_back(docs[i]);
      train_y.push_back(labels[i]);
    }
    for (auto i : fold.test) test.push_back(docs[i]);

    TrainedModel tm =
        train_model(train, train_y, classes, settings.features, settings.model, fold_seed(settings.seed, f));
    Predictions p = predict_documents(tm, test, settings.explain);

    FoldOutcome& out = result.folds[f];
    out.fold = f;
    for (auto i : fold.test) {
      out.test_ids.push_back(docs[i]->id);
      out.truth.push_back(labels[i]);
    }
    out.predicted = std::move(p.labels);
    out.metrics = compute_metrics(confusion_from(out.truth, out.predicted, classes.size()));
    out.vocabulary = tm.vocabulary.names();
    if (settings.explain) {
      out.explanations = FoldExplanations{tm.vocabulary.names(), output_names(tm.model), std::move(p.explanations)};
    }
    if (settings.keep_models) out.model = std::move(tm);
  });
  for (const auto& f : result.folds) result.pooled += f.metrics.confusion;
  return result;
}

std::optional<GlobalRanking> shap_ranking(const CvResult& cv) {
  std::vector<FoldExplanations> folds;
  for (const auto& f : cv.folds) {
    if (!f.explanations) return std::nullopt;
    folds.push_back(*f.explanations);
  }
  return aggregate(folds);
}

std::vector<std::string> class_labels(std::span<const AnnotatedDocument> corpus) {
  std::set<std::string> s;
  for (const auto& d : corpus) s.insert(d.class_label);
  return {s.begin(), s.end()};
}

BinaryResult run_binary(std::span<const AnnotatedDocument> corpus, const std::string& class_a,
                        const std::string& class_b, const ExperimentSettings& settings) {
  if (class_a == class_b) throw Error(ErrorCode::BadConfig, "binary classes must differ");
  std::map<std::string, std::set<std::string>> classes_of_term;
  for (const auto& d : corpus) {
    if (d.class_label == class_a || d.class_label == class_b) classes_of_term[d.term].insert(d.class_label);
  }
  std::vector<const AnnotatedDocument*> docs;
  std::vector<std::size_t> labels;
  for (const auto& d : corpus) {
    if (d.class_label != class_a && d.class_label != class_b) continue;
    if (classes_of_term[d.term].size() != 2) continue;
    docs.push_back(&d);
    labels.push_back(d.class_label == class_a ? 0 : 1);
  }
  if (docs.empty()) {
    throw Error(ErrorCode::MissingClass, "no term has documents of both '" + class_a + "' and '" + class_b + "'");
  }
  ExperimentSettings s = settings;
  if (settings.binary_drop_space) s.features.drop_space_features = true;
  BinaryResult r{class_a, class_b, cross_validate(docs, labels, {class_a, class_b}, s), 0.0};
  r.mean_accuracy = r.cv.mean(&Metrics::accuracy);
  return r;
}

PairwiseResult run_pairwise(std::span<const AnnotatedDocument> corpus, std::vector<std::string> classes,
                            const ExperimentSettings& settings) {
  if (classes.empty()) classes = class_labels(corpus);
  if (classes.size() < 2) throw Error(ErrorCode::MissingClass, "pairwise experiments need at least two classes");
  PairwiseResult r{classes, {}};
  for (std::size_t i = 0; i < classes.size(); ++i) {
    for (std::size_t j = i + 1; j < classes.size(); ++j) {
      r.pairs.push_back(run_binary(corpus, classes[i], classes[j], settings));
    }
  }
  return r;
}

MulticlassResult run_multiclass(std::span<const AnnotatedDocument> corpus, std::vector<std::string> classes,
                                const ExperimentSettings& settings) {
  if (classes.empty()) classes = class_labels(corpus);
  if (classes.size() < 2) throw Error(ErrorCode::MissingClass, "multiclass experiments need at least two classes");
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < classes.size(); ++i) index[classes[i]] = i;
  std::vector<const AnnotatedDocument*> docs;
  std::vector<std::size_t> labels;
  std::vector<std::size_t> seen(classes.size(), 0);
  for (const auto& d : corpus) {
    auto it = index.find(d.class_label);
    if (it == index.end()) continue;
    docs.push_back(&d);
    labels.push_back(it->second);
    ++seen[it->second];
  }
  for (std::size_t k = 0; k < classes.size(); ++k) {
    if (!seen[k]) throw Error(ErrorCode::MissingClass, "class '" + classes[k] + "' has no documents");
  }

  MulticlassResult r;
  r.cv = cross_validate(docs, labels, classes, settings);
  r.mean_mcc = r.cv.mean(&Metrics::mcc);
  r.min_mcc = r.cv.min(&Metrics::mcc);
  r.max_mcc = r.cv.max(&Metrics::mcc);
  double dummy = 0.0;
  for (std::size_t f = 0; f < r.cv.plan.k; ++f) {
    std::vector<std::size_t> counts(classes.size(), 0);
    for (auto i : r.cv.plan.folds[f].train) ++counts[labels[i]];
    const auto majority = static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
    ConfusionMatrix cm(classes.size());
    for (auto i : r.cv.plan.folds[f].test) cm.add(labels[i], majority);
    dummy += mcc(cm);
  }
  r.dummy_mcc = dummy / static_cast<double>(r.cv.plan.k);
  r.normalized_confusion = normalize_rows(r.cv.pooled);
  return r;
}

LogoResult leave_one_generator_out(std::span<const AnnotatedDocument> corpus, const std::string& held_out,
                                   const std::string& human, const ExperimentSettings& settings) {
  if (held_out == human) throw Error(ErrorCode::BadConfig, "the held-out class must be a machine class");
  std::vector<const AnnotatedDocument*> pool, unseen;
  std::vector<std::size_t> labels;
  std::size_t humans = 0;
  for (const auto& d : corpus) {
    if (d.class_label == held_out) {
      unseen.push_back(&d);
      continue;
    }
    pool.push_back(&d);
    labels.push_back(d.class_label == human ? 0 : 1);
    humans += d.class_label == human;
  }
  if (unseen.empty()) throw Error(ErrorCode::MissingClass, "held-out class '" + held_out + "' has no documents");
  if (humans == 0) throw Error(ErrorCode::MissingClass, "human class '" + human + "' has no documents");
  if (humans == pool.size()) throw Error(ErrorCode::MissingClass, "no machine class left for training");

  ExperimentSettings s = settings;
  s.keep_models = true;
  LogoResult r;
  r.held_out = held_out;
  r.human = human;
  r.cv = cross_validate(pool, labels, {human, "machine"}, s);
  r.test_recall.resize(r.cv.folds.size());
  parallel_for(r.cv.folds.size(), settings.jobs, [&](std::size_t f) {
    const auto p = predict_documents(*r.cv.folds[f].model, unseen, false);
    const auto hits = static_cast<double>(std::count(p.labels.begin(), p.labels.end(), std::size_t{1}));
    r.test_recall[f] = hits / static_cast<double>(unseen.size());
  });
  for (auto& f : r.cv.folds) {
    r.validation_recall.push_back(f.metrics.recall[1]);
    if (!settings.keep_models) f.model.reset();
  }
  r.validation = mean_sd(r.validation_recall);
  r.test = mean_sd(r.test_recall);
  return r;
}

ExternalResult eval_external(std::span<const TrainedModel> models, std::span<const AnnotatedDocument> docs,
                             const std::optional<std::string>& as_class) {
  if (models.empty()) throw Error(ErrorCode::BadConfig, "no models to evaluate");
  if (docs.empty()) throw Error(ErrorCode::BadManifest, "external set has no documents");
  ExternalResult r;
  r.classes = models.front().model.classes;
  for (const auto& m : models) {
    if (m.model.classes != r.classes) throw Error(ErrorCode::FoldMismatch, "models disagree on class labels");
  }
  std::vector<std::size_t> truth;
  std::set<std::size_t> distinct;
  for (const auto& d : docs) {
    const std::string& label = as_class ? *as_class : d.class_label;
    auto it = std::find(r.classes.begin(), r.classes.end(), label);
    if (it == r.classes.end())
      throw Error(ErrorCode::BadLabel, "document '" + d.id + "' has unknown class '" + label + "'");
    truth.push_back(static_cast<std::size_t>(it - r.classes.begin()));
    distinct.insert(truth.back());
  }
  r.single_class = distinct.size() == 1;
  const auto ptrs = pointers_to(docs);
  for (const auto& m : models) {
    const auto p = predict_documents(m, ptrs, false);
    r.per_model.push_back(compute_metrics(confusion_from(truth, p.labels, r.classes.size())));
    if (r.single_class) r.recall.push_back(r.per_model.back().recall[*distinct.begin()]);
  }
  const double n = static_cast<double>(models.size());
  for (const auto& m : r.per_model) {
    r.mean_accuracy += m.accuracy / n;
    r.mean_macro_f1 += m.macro_f1 / n;
    r.mean_mcc += m.mcc / n;
  }
  if (r.single_class) r.mean_recall = mean_sd(r.recall);
  return r;
}

std::vector<AnnotatedDocument> load_annotated_corpus(const std::filesystem::path& path, std::size_t max_sentences,
                                                     bool strict) {
  std::vector<AnnotatedDocument> docs;
  if (path.extension() == ".jsonl") {
    const auto entries = parse_manifest(read_file(path), strict);
    std::map<std::filesystem::path, std::vector<AnnotatedDocument>> files;
    for (const auto& e : entries) {
      if (e.conllu_path.empty()) {
        throw Error(ErrorCode::BadManifest, "entry '" + e.id + "' has no conllu_path; annotate it first");
      }
      const auto file = path.parent_path() / e.conllu_path;
      auto [it, inserted] = files.try_emplace(file);
      if (inserted) it->second = parse_conllu(read_file(file));
      const auto& in_file = it->second;
      auto match = std::find_if(in_file.begin(), in_file.end(), [&](const auto& d) { return d.id == e.id; });
      if (match == in_file.end()) {
        if (in_file.size() != 1) {
          throw Error(ErrorCode::BadManifest, "document '" + e.id + "' not found in " + file.string());
        }
        match = in_file.begin();
      }
      AnnotatedDocument d = *match;
      d.id = e.id;
      d.term = e.term;
      d.class_label = e.class_label;
      d.prompt_id = e.prompt_id;
      docs.push_back(std::move(d));
    }
  } else {
    docs = parse_conllu(read_file(path));
  }
  std::set<std::string> ids;
  for (auto& d : docs) {
    if (!ids.insert(d.id).second) throw Error(ErrorCode::BadManifest, "duplicate document id '" + d.id + "'");
    if (d.term.empty()) throw Error(ErrorCode::BadManifest, "document '" + d.id + "' has no term");
    if (d.class_label.empty()) throw Error(ErrorCode::BadManifest, "document '" + d.id + "' has no class_label");
    if (max_sentences) d = truncate(std::move(d), max_sentences);
  }
  return docs;
}

std::string fold_metrics_csv(const CvResult& cv) {
  std::string out = "fold,documents,accuracy,mcc,macro_f1";
  for (const auto& c : cv.classes) out += ",recall_" + csv_field(c);
  out += '\n';
  auto row = [&](const std::string& name, std::size_t n, double acc, double m, double f1,
                 const std::vector<double>& recall) {
    out += name + ',' + std::to_string(n) + ',' + format_double(acc) + ',' + format_double(m) + ',' + format_double(f1);
    for (double r : recall) out += ',' + format_double(r);
    out += '\n';
  };
  std::vector<double> mean_recall(cv.classes.size(), 0.0);
  std::size_t total = 0;
  for (const auto& f : cv.folds) {
    row(std::to_string(f.fold), f.test_ids.size(), f.metrics.accuracy, f.metrics.mcc, f.metrics.macro_f1,
        f.metrics.recall);
    for (std::size_t k = 0; k < mean_recall.size(); ++k) {
      mean_recall[k] += f.metrics.recall[k] / static_cast<double>(cv.folds.size());
    }
    total += f.test_ids.size();
  }
  row("mean", total, cv.mean(&Metrics::accuracy), cv.mean(&Metrics::mcc), cv.mean(&Metrics::macro_f1), mean_recall);
  return out;
}

std::string confusion_csv(const ConfusionMatrix& cm, const std::vector<std::string>& classes) {
  std::string out = "truth";
  for (const auto& c : classes) out += ',' + csv_field(c);
  out += '\n';
  for (std::size_t i = 0; i < cm.classes(); ++i) {
    out += csv_field(classes[i]);
    for (std::size_t j = 0; j < cm.classes(); ++j) out += ',' + std::to_string(cm(i, j));
    out += '\n';
  }
  return out;
}

std::string matrix_of_reals_csv(const std::vector<std::vector<double>>& m, const std::vector<std::string>& classes) {
  std::string out = "truth";
  for (const auto& c : classes) out += ',' + csv_field(c);
  out += '\n';
  for (std::size_t i = 0; i < m.size(); ++i) {
    out += csv_field(classes[i]);
    for (double v : m[i]) out += ',' + format_double(v);
    out += '\n';
  }
  return out;
}

std::string pairwise_csv(const PairwiseResult& r) {
  std::string out = "class";
  for (const auto& c : r.classes) out += ',' + csv_field(c);
  out += '\n';
  for (std::size_t i = 0; i < r.classes.size(); ++i) {
    out += csv_field(r.classes[i]);
    for (std::size_t j = 0; j < r.classes.size(); ++j) {
      out += ',';
      if (auto a = r.accuracy(i, j)) out += format_double(*a);
    }
    out += '\n';
  }
  return out;
}

nlohmann::json metrics_json(const Metrics& m) {
  std::vector<std::vector<std::uint64_t>> counts(m.confusion.classes());
  for (std::size_t i = 0; i < counts.size(); ++i) {
    for (std::size_t j = 0; j < counts.size(); ++j) counts[i].push_back(m.confusion(i, j));
  }
  return {{"accuracy", m.accuracy}, {"mcc", m.mcc},        {"macro_f1", m.macro_f1},
          {"recall", m.recall},     {"confusion", counts}, {"normalized_confusion", m.normalized}};
}

nlohmann::json cv_json(const CvResult& cv) {
  nlohmann::json folds = nlohmann::json::array();
  for (const auto& f : cv.folds) {
    folds.push_back({{"fold", f.fold},
                     {"test_ids", f.test_ids},
                     {"vocabulary_size", f.vocabulary.size()},
                     {"metrics", metrics_json(f.metrics)}});
  }
  return {{"classes", cv.classes},
          {"k", cv.plan.k},
          {"folds", std::move(folds)},
          {"mean",
           {{"accuracy", cv.mean(&Metrics::accuracy)},
            {"mcc", cv.mean(&Metrics::mcc)},
            {"macro_f1", cv.mean(&Metrics::macro_f1)}}},
          {"pooled", metrics_json(compute_metrics(cv.pooled))}};
}

}  // namespace stylo
