#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <nlohmann/json.hpp>
#include <span>
#include <string>
#include <vector>

#include "stylo/annotation.hpp"
#include "stylo/error.hpp"
#include "stylo/features.hpp"
#include "stylo/model.hpp"
#include "stylo/util.hpp"

namespace stylo {

// Attributions of one document: values[output][feature], with
// base[output] + sum_f values[output][f] == predict_margin(...)[output].
struct ShapExplanation {
  std::string doc_id;
  std::vector<double> base;
  std::vector<std::vector<double>> values;
};

// ---------------------------------------------------------------------------
// TreeSHAP (path-dependent, polynomial time)

// Cover-weighted mean output of every tree, plus base_score.
std::vector<double> expected_margin(const TreeEnsemble& model);

ShapExplanation tree_shap(const TreeEnsemble& model, std::span<const double> x);

ShapExplanation tree_shap(const TreeEnsemble& model, const FeatureVocabulary& vocab, std::span<const double> x,
                          std::string doc_id = {});

// Max over outputs of |base + sum(values) - margin|.
double local_accuracy_error(const ShapExplanation& e, std::span<const double> margin);

// Names of the margins an explanation covers: the positive class for a
// single-margin binary model, otherwise one per class.
std::vector<std::string> output_names(const TreeEnsemble& model);

// ---------------------------------------------------------------------------
// Aggregation across folds

struct FoldExplanations {
  std::vector<std::string> feature_names;
  std::vector<std::string> outputs;
  std::vector<ShapExplanation> explanations;
};

struct RankedFeature {
  std::string feature;
  std::vector<double> mean_abs;  // per output
  double total = 0.0;            // mean over outputs
};

struct GlobalRanking {
  std::vector<std::string> outputs;
  std::vector<RankedFeature> features;  // descending total, then name

  GlobalRanking top(std::size_t k) const {
    GlobalRanking r{outputs, {}};
    r.features.assign(features.begin(), features.begin() + static_cast<std::ptrdiff_t>(std::min(k, features.size())));
    return r;
  }
};

// Mean |SHAP| per feature and output over every document of every fold. The
// feature space is the union of the fold vocabularies; a feature absent from
// a fold contributes zeros for that fold's documents.
GlobalRanking aggregate(std::span<const FoldExplanations> folds);

std::string ranking_csv(const GlobalRanking& ranking);

nlohmann::json explanation_json(const ShapExplanation& e, std::span<const std::string> feature_names);

// ---------------------------------------------------------------------------
// Span highlighting

struct WeightedFeature {
  FeatureKey key;
  double value = 0.0;
};

struct HighlightSpan {
  std::size_t start = 0;  // code points into the reconstructed text
  std::size_t end = 0;
  std::string feature;
  double value = 0.0;

  bool operator==(const HighlightSpan&) const = default;
};

struct SpanReport {
  std::string doc_id;
  std::string text;
  std::vector<HighlightSpan> spans;
  std::vector<WeightedFeature> absent;  // important features with no occurrence
};

// Every token window instantiating one of `features` becomes a span; windows
// follow the extraction rules of the feature's family. Multi-token windows
// are highlighted whole and overlapping spans are kept separately.
SpanReport highlight(const AnnotatedDocument& doc, std::span<const WeightedFeature> features);

nlohmann::json span_report_json(const SpanReport& r);

// Text with every covered character run wrapped in <mark>; positive-SHAP
// features in red, negative in blue, the title listing the features.
std::string span_report_html(std::span<const SpanReport> reports);

// ---------------------------------------------------------------------------
// SVG figures

enum class PlotColor { ByClass, ByFeatureValue };

// Documents explained by one model, with the feature rows they were
// explained at and their class labels.
struct PlotData {
  std::vector<std::string> feature_names;
  std::vector<ShapExplanation> explanations;
  std::vector<std::vector<double>> rows;
  std::vector<std::string> doc_classes;
};

// One dot per document on each of the top_k features (by mean |SHAP| for
// `output`), placed at its SHAP value and colored by the document's class or
// by the feature's value within that feature's range.
std::string shap_summary_svg(const PlotData& data, std::size_t output, std::size_t top_k, PlotColor color);

// Horizontal bars of mean |SHAP|, stacked per output, for the top_k features.
std::string ranking_svg(const GlobalRanking& ranking, std::size_t top_k);

}  // namespace stylo
