#include "stylo/model.hpp"

namespace stylo {

namespace {

const nlohmann::json& field(const nlohmann::json& j, const char* key, const std::string& path) {
  if (!j.is_object() || !j.contains(key)) throw Error(ErrorCode::CorruptModel, path + "." + key + " missing");
  return j[key];
}

template <typename T>
T get(const nlohmann::json& j, const char* key, const std::string& path) {
  const auto& v = field(j, key, path);
  try {
    return v.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorCode::CorruptModel, path + "." + key + " has the wrong type");
  }
}

double finite(double v, const std::string& path) {
  if (!std::isfinite(v)) throw Error(ErrorCode::CorruptModel, path + " is not finite");
  return v;
}

}  // namespace

double gini(std::span<const std::size_t> class_counts) {
  double total = 0.0;
  for (auto c : class_counts) total += static_cast<double>(c);
  if (total == 0.0) throw Error(ErrorCode::AllZero, "gini of an empty node");
  double sum_sq = 0.0;
  for (auto c : class_counts) {
    const double p = static_cast<double>(c) / total;
    sum_sq += p * p;
  }
  return 1.0 - sum_sq;
}

std::string_view to_string(ModelKind kind) { return kind == ModelKind::Cart ? "cart" : "gbdt"; }

void check_input(const TreeEnsemble& model, std::size_t width) {
  if (width != model.num_features) {
    throw Error(ErrorCode::ShapeMismatch, "input has " + std::to_string(width) + " features, model expects " +
                                              std::to_string(model.num_features));
  }
}

void check_vocabulary(const TreeEnsemble& model, const FeatureVocabulary& vocab) {
  if (!model.vocabulary_fingerprint.empty() && model.vocabulary_fingerprint != vocab.fingerprint()) {
    throw Error(ErrorCode::VocabularyMismatch,
                "model was trained on vocabulary " + model.vocabulary_fingerprint + ", got " + vocab.fingerprint());
  }
  check_input(model, vocab.size());
}

void add_tree_output(const Tree& tree, double weight, std::span<const double> x, std::span<double> margin) {
  const auto& leaf = tree.nodes[tree.leaf_for(x)].value;
  if (leaf.size() == 1) {
    margin[tree.output] += weight * leaf[0];
  } else {
    for (std::size_t k = 0; k < leaf.size(); ++k) margin[k] += weight * leaf[k];
  }
}

std::vector<double> predict_margin(const TreeEnsemble& model, std::span<const double> x) {
  check_input(model, x.size());
  std::vector<double> margin = model.base_score;
  for (std::size_t t = 0; t < model.trees.size(); ++t)
    add_tree_output(model.trees[t], model.tree_weights[t], x, margin);
  return margin;
}

std::vector<double> margin_to_proba(const TreeEnsemble& model, std::span<const double> margin) {
  std::vector<double> p(margin.begin(), margin.end());
  if (model.kind == ModelKind::Cart) return p;  // leaves already hold class frequencies
  if (p.size() == 1) {
    const double pos = 1.0 / (1.0 + std::exp(-margin[0]));
    return {1.0 - pos, pos};
  }
  const double mx = *std::max_element(p.begin(), p.end());
  double sum = 0.0;
  for (double& v : p) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (double& v : p) v /= sum;
  return p;
}

std::vector<double> predict_proba(const TreeEnsemble& model, std::span<const double> x) {
  return margin_to_proba(model, predict_margin(model, x));
}

std::size_t predict_label(const TreeEnsemble& model, std::span<const double> x) {
  const auto p = predict_proba(model, x);
  return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
}

std::vector<std::size_t> predict(const TreeEnsemble& model, const MatrixView& X) {
  std::vector<std::size_t> labels(X.rows);
  for (std::size_t i = 0; i < X.rows; ++i) labels[i] = predict_label(model, X.row(i));
  return labels;
}

nlohmann::json model_json(const TreeEnsemble& model) {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& tree : model.trees) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : tree.nodes) {
      if (n.is_leaf()) {
        nodes.push_back({{"leaf", n.value}, {"cover", n.cover}});
      } else {
        nodes.push_back({{"feature", n.feature},
                         {"threshold", n.threshold},
                         {"left", n.left},
                         {"right", n.right},
                         {"default_left", n.default_left},
                         {"cover", n.cover}});
      }
    }
    trees.push_back({{"output", tree.output}, {"nodes", std::move(nodes)}});
  }
  return {{"format_version", kModelFormatVersion},
          {"kind", to_string(model.kind)},
          {"config", model.config},
          {"classes", model.classes},
          {"num_features", model.num_features},
          {"base_score", model.base_score},
          {"vocabulary_fingerprint", model.vocabulary_fingerprint},
          {"trees", std::move(trees)},
          {"tree_weights", model.tree_weights}};
}

TreeEnsemble model_from_json(const nlohmann::json& j) {
  const std::string root = "$";
  if (get<int>(j, "format_version", root) != kModelFormatVersion) {
    throw Error(ErrorCode::CorruptModel, "$.format_version unsupported");
  }
  TreeEnsemble m;
  const auto kind = get<std::string>(j, "kind", root);
  if (kind == "cart")
    m.kind = ModelKind::Cart;
  else if (kind == "gbdt")
    m.kind = ModelKind::Gbdt;
  else
    throw Error(ErrorCode::CorruptModel, "$.kind unknown '" + kind + "'");
  m.config = field(j, "config", root);
  m.classes = get<std::vector<std::string>>(j, "classes", root);
  m.num_features = get<std::size_t>(j, "num_features", root);
  m.base_score = get<std::vector<double>>(j, "base_score", root);
  m.vocabulary_fingerprint = get<std::string>(j, "vocabulary_fingerprint", root);
  m.tree_weights = get<std::vector<double>>(j, "tree_weights", root);
  if (m.base_score.empty()) throw Error(ErrorCode::CorruptModel, "$.base_score is empty");

  const auto& trees = field(j, "trees", root);
  if (!trees.is_array()) throw Error(ErrorCode::CorruptModel, "$.trees is not an array");
  for (std::size_t t = 0; t < trees.size(); ++t) {
    const std::string tpath = "$.trees[" + std::to_string(t) + "]";
    Tree tree;
    tree.output = get<int>(trees[t], "output", tpath);
    if (tree.output < 0 || static_cast<std::size_t>(tree.output) >= m.num_outputs()) {
      throw Error(ErrorCode::CorruptModel, tpath + ".output out of range");
    }
    const auto& nodes = field(trees[t], "nodes", tpath);
    if (!nodes.is_array() || nodes.empty()) throw Error(ErrorCode::CorruptModel, tpath + ".nodes is empty");
    const int count = static_cast<int>(nodes.size());
    for (int i = 0; i < count; ++i) {
      const std::string npath = tpath + ".nodes[" + std::to_string(i) + "]";
      const auto& nj = nodes[static_cast<std::size_t>(i)];
      TreeNode n;
      n.cover = finite(get<double>(nj, "cover", npath), npath + ".cover");
      if (nj.contains("leaf")) {
        n.value = get<std::vector<double>>(nj, "leaf", npath);
        if (n.value.size() != 1 && n.value.size() != m.num_outputs()) {
          throw Error(ErrorCode::CorruptModel, npath + ".leaf has the wrong length");
        }
        for (double v : n.value) finite(v, npath + ".leaf");
      } else {
        n.feature = get<int>(nj, "feature", npath);
        n.threshold = finite(get<double>(nj, "threshold", npath), npath + ".threshold");
        n.left = get<int>(nj, "left", npath);
        n.right = get<int>(nj, "right", npath);
        n.default_left = get<bool>(nj, "default_left", npath);
        if (n.feature < 0 || static_cast<std::size_t>(n.feature) >= m.num_features) {
          throw Error(ErrorCode::CorruptModel, npath + ".feature out of range");
        }
        if (n.left <= i || n.right <= i || n.left >= count || n.right >= count || n.left == n.right) {
          throw Error(ErrorCode::CorruptModel, npath + " has invalid children");
        }
      }
      tree.nodes.push_back(std::move(n));
    }
    m.trees.push_back(std::move(tree));
  }
  if (m.tree_weights.size() != m.trees.size()) {
    throw Error(ErrorCode::CorruptModel, "$.tree_weights length differs from $.trees");
  }
  return m;
}

std::string save_model_string(const TreeEnsemble& model) { return model_json(model).dump(1) + "\n"; }

TreeEnsemble load_model_string(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::CorruptModel, std::string("$: ") + e.what());
  }
  return model_from_json(j);
}

void save_model(const TreeEnsemble& model, const std::filesystem::path& path) {
  write_file_atomic(path, save_model_string(model));
}

TreeEnsemble load_model(const std::filesystem::path& path) { return load_model_string(read_file(path)); }

}  // namespace stylo
