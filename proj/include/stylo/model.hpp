#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <nlohmann/json.hpp>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "stylo/error.hpp"
#include "stylo/features.hpp"

namespace stylo {

// Non-owning dense row-major matrix.
struct MatrixView {
  std::span<const double> values;
  std::size_t rows = 0;
  std::size_t cols = 0;

  MatrixView() = default;
  MatrixView(std::span<const double> v, std::size_t r, std::size_t c) : values(v), rows(r), cols(c) {
    if (v.size() != r * c) throw Error(ErrorCode::ShapeMismatch, "matrix buffer does not match shape");
  }
  explicit MatrixView(const FeatureMatrix& m) : MatrixView(m.values, m.rows(), m.cols()) {}

  std::span<const double> row(std::size_t i) const { return values.subspan(i * cols, cols); }
  double at(std::size_t i, std::size_t j) const { return values[i * cols + j]; }
};

double gini(std::span<const std::size_t> class_counts);

// ---------------------------------------------------------------------------
// Trees

struct TreeNode {
  int feature = -1;  // < 0 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  bool default_left = true;
  double cover = 0.0;         // training rows reaching the node
  std::vector<double> value;  // leaves only

  bool is_leaf() const { return feature < 0; }
  bool operator==(const TreeNode&) const = default;
};

// Node 0 is the root; children always follow their parent. Leaf vectors
// either hold one value, added to margin `output`, or one per margin.
struct Tree {
  std::vector<TreeNode> nodes;
  int output = 0;

  // x <= threshold goes left.
  int leaf_for(std::span<const double> x) const {
    int n = 0;
    while (!nodes[n].is_leaf()) {
      const auto& node = nodes[n];
      n = x[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left : node.right;
    }
    return n;
  }

  int depth() const {
    std::vector<int> d(nodes.size(), 0);
    int best = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (nodes[i].is_leaf()) continue;
      d[nodes[i].left] = d[nodes[i].right] = d[i] + 1;
      best = std::max(best, d[i] + 1);
    }
    return best;
  }

  std::size_t num_leaves() const {
    return static_cast<std::size_t>(
        std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.is_leaf(); }));
  }

  bool operator==(const Tree&) const = default;
};

enum class ModelKind { Cart, Gbdt };

std::string_view to_string(ModelKind kind);

struct TreeEnsemble {
  ModelKind kind = ModelKind::Gbdt;
  std::vector<std::string> classes;
  std::size_t num_features = 0;
  std::vector<double> base_score;  // one per margin
  std::vector<Tree> trees;
  std::vector<double> tree_weights;
  std::string vocabulary_fingerprint;
  nlohmann::json config = nlohmann::json::object();

  std::size_t num_outputs() const { return base_score.size(); }
  std::size_t num_classes() const { return classes.size(); }
};

void check_input(const TreeEnsemble& model, std::size_t width);

void check_vocabulary(const TreeEnsemble& model, const FeatureVocabulary& vocab);

void add_tree_output(const Tree& tree, double weight, std::span<const double> x, std::span<double> margin);

// base_score + sum of weight * tree output, summed in tree order.
std::vector<double> predict_margin(const TreeEnsemble& model, std::span<const double> x);

std::vector<double> margin_to_proba(const TreeEnsemble& model, std::span<const double> margin);

std::vector<double> predict_proba(const TreeEnsemble& model, std::span<const double> x);

// argmax of the class probabilities; ties go to the lowest class index.
std::size_t predict_label(const TreeEnsemble& model, std::span<const double> x);

std::vector<std::size_t> predict(const TreeEnsemble& model, const MatrixView& X);

// ---------------------------------------------------------------------------
// Serialization

inline constexpr int kModelFormatVersion = 1;

nlohmann::json model_json(const TreeEnsemble& model);

TreeEnsemble model_from_json(const nlohmann::json& j);

std::string save_model_string(const TreeEnsemble& model);

TreeEnsemble load_model_string(std::string_view text);

void save_model(const TreeEnsemble& model, const std::filesystem::path& path);

TreeEnsemble load_model(const std::filesystem::path& path);

}  // namespace stylo
