#pragma once

// Cross-validated experiment drivers: pairwise binary, multiclass,
// leave-one-generator-out, and evaluation of trained fold models on an
// external document set. Every fold rebuilds its vocabulary from its own
// training documents.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "stylo/annotation.hpp"
#include "stylo/cart.hpp"
#include "stylo/corpus.hpp"
#include "stylo/eval.hpp"
#include "stylo/explain.hpp"
#include "stylo/features.hpp"
#include "stylo/gbdt.hpp"
#include "stylo/model.hpp"
#include "stylo/parallel.hpp"
#include "stylo/random.hpp"
#include "stylo/util.hpp"

namespace stylo {

enum class ModelType { Gbdt, Cart };

struct ModelSettings {
  ModelType type = ModelType::Gbdt;
  BoostConfig boost;
  CartParams cart;
};

struct ExperimentSettings {
  FeatureConfig features;
  ModelSettings model;
  bool binary_drop_space = true;  // binary runs drop every SPACE-bearing feature
  std::size_t folds = 10;
  std::uint64_t seed = 0;
  unsigned jobs = 1;
  bool explain = false;      // collect TreeSHAP values for every test document
  bool keep_models = false;  // keep each fold's vocabulary and model
};

struct TrainedModel {
  FeatureVocabulary vocabulary;
  TreeEnsemble model;
};

std::uint64_t fold_seed(std::uint64_t seed, std::size_t fold);

// Builds the vocabulary from `train` alone, then fits the configured model.
// labels[i] indexes `classes`.
TrainedModel train_model(std::span<const AnnotatedDocument* const> train, std::span<const std::size_t> labels,
                         const std::vector<std::string>& classes, const FeatureConfig& features,
                         const ModelSettings& settings, std::uint64_t seed, unsigned jobs = 1);

struct Predictions {
  std::vector<std::size_t> labels;
  std::vector<ShapExplanation> explanations;  // filled when requested
};

Predictions predict_documents(const TrainedModel& tm, std::span<const AnnotatedDocument* const> docs, bool explain);

// ---------------------------------------------------------------------------
// Cross-validation core

struct FoldOutcome {
  std::size_t fold = 0;
  std::vector<std::string> test_ids;
  std::vector<std::size_t> truth;
  std::vector<std::size_t> predicted;
  Metrics metrics;
  std::vector<std::string> vocabulary;  // canonical names, in column order
  std::optional<FoldExplanations> explanations;
  std::optional<TrainedModel> model;
};

struct CvResult {
  std::vector<std::string> classes;
  FoldPlan plan;
  std::vector<FoldOutcome> folds;
  ConfusionMatrix pooled;

  double mean(double Metrics::* field) const {
    double s = 0.0;
    for (const auto& f : folds) s += f.metrics.*field;
    return folds.empty() ? 0.0 : s / static_cast<double>(folds.size());
  }
  double min(double Metrics::* field) const {
    double v = folds.empty() ? 0.0 : folds.front().metrics.*field;
    for (const auto& f : folds) v = std::min(v, f.metrics.*field);
    return v;
  }
  double max(double Metrics::* field) const {
    double v = folds.empty() ? 0.0 : folds.front().metrics.*field;
    for (const auto& f : folds) v = std::max(v, f.metrics.*field);
    return v;
  }
};

// Group k-fold over terms. Folds run in parallel (up to settings.jobs) and
// are merged by fold index, so results do not depend on the job count.
CvResult cross_validate(std::span<const AnnotatedDocument* const> docs, std::span<const std::size_t> labels,
                        const std::vector<std::string>& classes, const ExperimentSettings& settings);

std::optional<GlobalRanking> shap_ranking(const CvResult& cv);

// ---------------------------------------------------------------------------
// Protocols

std::vector<std::string> class_labels(std::span<const AnnotatedDocument> corpus);

struct BinaryResult {
  std::string class_a;
  std::string class_b;
  CvResult cv;
  double mean_accuracy = 0.0;
};

// Restricted to terms that have documents of both classes; class_a is label
// 0 and class_b label 1.
BinaryResult run_binary(std::span<const AnnotatedDocument> corpus, const std::string& class_a,
                        const std::string& class_b, const ExperimentSettings& settings);

struct PairwiseResult {
  std::vector<std::string> classes;
  std::vector<BinaryResult> pairs;  // (i, j) with i < j in class order

  std::optional<double> accuracy(std::size_t i, std::size_t j) const {
    if (i == j) return std::nullopt;
    const auto& a = classes[std::min(i, j)];
    const auto& b = classes[std::max(i, j)];
    for (const auto& p : pairs) {
      if (p.class_a == a && p.class_b == b) return p.mean_accuracy;
    }
    return std::nullopt;
  }
};

PairwiseResult run_pairwise(std::span<const AnnotatedDocument> corpus, std::vector<std::string> classes,
                            const ExperimentSettings& settings);

struct MulticlassResult {
  CvResult cv;
  double mean_mcc = 0.0;
  double min_mcc = 0.0;
  double max_mcc = 0.0;
  double dummy_mcc = 0.0;                                 // per-fold majority-class predictor, averaged
  std::vector<std::vector<double>> normalized_confusion;  // pooled over folds
};

MulticlassResult run_multiclass(std::span<const AnnotatedDocument> corpus, std::vector<std::string> classes,
                                const ExperimentSettings& settings);

struct LogoResult {
  std::string held_out;
  std::string human;
  CvResult cv;                            // classes {human, "machine"}
  std::vector<double> validation_recall;  // machine recall on each fold's test split
  std::vector<double> test_recall;        // share of held-out documents flagged machine
  MeanSd validation;
  MeanSd test;
};

// Human documents are label 0, every other class except `held_out` label 1.
// Each fold classifier is also applied to all documents of `held_out`.
LogoResult leave_one_generator_out(std::span<const AnnotatedDocument> corpus, const std::string& held_out,
                                   const std::string& human, const ExperimentSettings& settings);

struct ExternalResult {
  std::vector<std::string> classes;
  bool single_class = false;
  std::vector<Metrics> per_model;
  std::vector<double> recall;  // single-class sets: recall of that class per model
  MeanSd mean_recall;
  double mean_accuracy = 0.0;
  double mean_macro_f1 = 0.0;
  double mean_mcc = 0.0;
};

// Applies already trained models without retraining. `as_class` relabels
// every document (for sets that contain only rewritten machine text).
ExternalResult eval_external(std::span<const TrainedModel> models, std::span<const AnnotatedDocument> docs,
                             const std::optional<std::string>& as_class = std::nullopt);

// ---------------------------------------------------------------------------
// Corpus loading

// Reads a CoNLL-U file, or a JSONL manifest whose entries point at CoNLL-U
// files through `conllu_path` (relative to the manifest). Manifest fields
// override the document header. Documents are cut to `max_sentences`.
std::vector<AnnotatedDocument> load_annotated_corpus(const std::filesystem::path& path, std::size_t max_sentences = 18,
                                                     bool strict = false);

// ---------------------------------------------------------------------------
// Result files

std::string fold_metrics_csv(const CvResult& cv);

std::string confusion_csv(const ConfusionMatrix& cm, const std::vector<std::string>& classes);

std::string matrix_of_reals_csv(const std::vector<std::vector<double>>& m, const std::vector<std::string>& classes);

// Symmetric matrix of mean binary accuracies; the diagonal is left empty.
std::string pairwise_csv(const PairwiseResult& r);

nlohmann::json metrics_json(const Metrics& m);

nlohmann::json cv_json(const CvResult& cv);

}  // namespace stylo
