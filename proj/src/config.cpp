#include "stylo/config.hpp"

namespace stylo {

namespace {

class LineParser {
 public:
  LineParser(std::string_view text, std::size_t line_no) : s_(text), line_(line_no) {}

  [[noreturn]] void fail(const std::string& why) const {
    throw Error(ErrorCode::BadConfig, "config line " + std::to_string(line_) + ": " + why);
  }

  void skip_ws() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
  }

  bool at_end_or_comment() {
    skip_ws();
    return pos_ >= s_.size() || s_[pos_] == '#';
  }

  bool consume(char c) {
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  std::string key() {
    skip_ws();
    if (pos_ < s_.size() && (s_[pos_] == '"' || s_[pos_] == '\'')) return string_value();
    const std::size_t start = pos_;
    while (pos_ < s_.size() &&
           (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_' || s_[pos_] == '-')) {
      ++pos_;
    }
    if (start == pos_) fail("expected a key");
    return std::string(s_.substr(start, pos_ - start));
  }

  std::vector<std::string> dotted_key() {
    std::vector<std::string> parts{key()};
    while (consume('.')) parts.push_back(key());
    return parts;
  }

  std::string string_value() {
    const char quote = s_[pos_++];
    std::string out;
    while (pos_ < s_.size() && s_[pos_] != quote) {
      char c = s_[pos_++];
      if (quote == '"' && c == '\\') {
        if (pos_ >= s_.size()) fail("unterminated escape");
        const char e = s_[pos_++];
        switch (e) {
          case 'n':
            c = '\n';
            break;
          case 't':
            c = '\t';
            break;
          case '"':
            c = '"';
            break;
          case '\\':
            c = '\\';
            break;
          default:
            fail(std::string("unsupported escape \\") + e);
        }
      }
      out += c;
    }
    if (pos_ >= s_.size()) fail("unterminated string");
    ++pos_;
    return out;
  }

  nlohmann::json value() {
    skip_ws();
    if (pos_ >= s_.size()) fail("missing value");
    const char c = s_[pos_];
    if (c == '"' || c == '\'') return string_value();
    if (c == '[') {
      ++pos_;
      nlohmann::json arr = nlohmann::json::array();
      if (consume(']')) return arr;
      for (;;) {
        arr.push_back(value());
        if (consume(']')) return arr;
        if (!consume(',')) fail("expected ',' or ']' in array");
        if (consume(']')) return arr;  // trailing comma
      }
    }
    const std::size_t start = pos_;
    while (pos_ < s_.size() && s_[pos_] != ',' && s_[pos_] != ']' && s_[pos_] != '#' && s_[pos_] != ' ' &&
           s_[pos_] != '\t') {
      ++pos_;
    }
    std::string token(s_.substr(start, pos_ - start));
    if (token == "true") return true;
    if (token == "false") return false;
    std::erase(token, '_');
    if (token.empty()) fail("missing value");
    const char* first = token.data();
    const char* last = token.data() + token.size();
    if (*first == '+') ++first;
    if (token.find_first_of(".eE") == std::string::npos || token == "inf" || token == "nan") {
      std::int64_t iv = 0;
      auto [ptr, ec] = std::from_chars(first, last, iv);
      if (ec == std::errc() && ptr == last) return iv;
    }
    double dv = 0.0;
    auto [ptr, ec] = std::from_chars(first, last, dv);
    if (ec != std::errc() || ptr != last) fail("cannot parse value '" + token + "'");
    return dv;
  }

 private:
  std::string_view s_;
  std::size_t line_;
  std::size_t pos_ = 0;
};

nlohmann::json& descend(nlohmann::json& root, const std::vector<std::string>& path, std::size_t count,
                        const LineParser& p) {
  nlohmann::json* node = &root;
  for (std::size_t i = 0; i < count; ++i) {
    auto& next = (*node)[path[i]];
    if (next.is_null()) next = nlohmann::json::object();
    if (!next.is_object()) p.fail("'" + path[i] + "' is not a table");
    node = &next;
  }
  return *node;
}

}  // namespace

nlohmann::json parse_config(std::string_view text) {
  nlohmann::json root = nlohmann::json::object();
  std::vector<std::string> table;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    start = end + 1;
    ++line_no;
    LineParser p(line, line_no);
    if (p.at_end_or_comment()) continue;
    if (p.consume('[')) {
      table = p.dotted_key();
      if (!p.consume(']')) p.fail("expected ']'");
      descend(root, table, table.size(), p);
    } else {
      auto key = p.dotted_key();
      if (!p.consume('=')) p.fail("expected '='");
      auto value = p.value();
      std::vector<std::string> full = table;
      full.insert(full.end(), key.begin(), key.end());
      auto& parent = descend(root, full, full.size() - 1, p);
      if (parent.contains(full.back())) p.fail("duplicate key '" + full.back() + "'");
      parent[full.back()] = std::move(value);
    }
    if (!p.at_end_or_comment()) p.fail("trailing characters");
    if (end == text.size()) break;
  }
  return root;
}

ExperimentKind parse_experiment_kind(const std::string& s) {
  if (s == "binary") return ExperimentKind::Binary;
  if (s == "pairwise") return ExperimentKind::Pairwise;
  if (s == "multiclass") return ExperimentKind::Multiclass;
  if (s == "logo") return ExperimentKind::LeaveOneOut;
  if (s == "external") return ExperimentKind::External;
  throw Error(ErrorCode::BadConfig, "unknown experiment kind '" + s + "'");
}

FeatureConfig feature_config_from(const nlohmann::json& root) {
  FeatureConfig f;
  f.size_limit = config_get<std::size_t>(root, "features", "size_limit", f.size_limit);
  const auto selection = config_get<std::string>(root, "features", "selection", "frequency");
  if (selection == "frequency") {
    f.selection = SelectionMetric::Frequency;
  } else if (selection == "document_frequency") {
    f.selection = SelectionMetric::DocumentFrequency;
  } else {
    throw Error(ErrorCode::BadConfig, "features.selection must be frequency or document_frequency");
  }
  f.max_lemma_n = config_get<std::size_t>(root, "features", "max_lemma_n", f.max_lemma_n);
  f.max_pos_n = config_get<std::size_t>(root, "features", "max_pos_n", f.max_pos_n);
  f.dep_bigrams = config_get<bool>(root, "features", "dep_bigrams", f.dep_bigrams);
  f.morph_unigrams = config_get<bool>(root, "features", "morph_unigrams", f.morph_unigrams);
  f.drop_space_features = config_get<bool>(root, "features", "drop_space", f.drop_space_features);
  f.drop_punct_features = config_get<bool>(root, "features", "drop_punct", f.drop_punct_features);
  return f;
}

ModelSettings model_settings_from(const nlohmann::json& root) {
  ModelSettings m;
  const auto type = config_get<std::string>(root, "model", "type", "gbdt");
  if (type == "gbdt") {
    m.type = ModelType::Gbdt;
  } else if (type == "cart") {
    m.type = ModelType::Cart;
  } else {
    throw Error(ErrorCode::BadConfig, "model.type must be gbdt or cart");
  }
  BoostConfig& b = m.boost;
  b.max_depth = config_get<std::size_t>(root, "model", "max_depth", b.max_depth);
  b.num_leaves = config_get<std::size_t>(root, "model", "num_leaves", b.num_leaves);
  b.learning_rate = config_get<double>(root, "model", "learning_rate", b.learning_rate);
  b.n_iterations = config_get<std::size_t>(root, "model", "n_iterations", b.n_iterations);
  b.bagging_freq = config_get<std::size_t>(root, "model", "bagging_freq", b.bagging_freq);
  b.bagging_fraction = config_get<double>(root, "model", "bagging_fraction", b.bagging_fraction);
  b.lambda = config_get<double>(root, "model", "lambda", b.lambda);
  b.min_data_in_leaf = config_get<std::size_t>(root, "model", "min_data_in_leaf", b.min_data_in_leaf);
  b.min_sum_hessian = config_get<double>(root, "model", "min_sum_hessian", b.min_sum_hessian);
  b.max_bins = config_get<std::size_t>(root, "model", "max_bins", b.max_bins);
  const nlohmann::json empty = nlohmann::json::object();
  const auto& model = root.contains("model") ? root["model"] : empty;
  b.dart.enabled = config_get<bool>(model, "dart", "enabled", b.dart.enabled);
  b.dart.drop_rate = config_get<double>(model, "dart", "drop_rate", b.dart.drop_rate);
  b.dart.skip_drop = config_get<double>(model, "dart", "skip_drop", b.dart.skip_drop);
  b.dart.max_drop = config_get<std::size_t>(model, "dart", "max_drop", b.dart.max_drop);
  m.cart.min_samples_split = config_get<std::size_t>(model, "cart", "min_samples_split", m.cart.min_samples_split);
  m.cart.max_depth = config_get<std::size_t>(model, "cart", "max_depth", m.cart.max_depth);
  b.validate();
  return m;
}

ExperimentConfig experiment_config_from(const nlohmann::json& root, const std::filesystem::path& base) {
  auto resolve = [&](const std::string& p) -> std::filesystem::path {
    if (p.empty()) return {};
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
  };
  ExperimentConfig c;
  c.kind = parse_experiment_kind(config_get<std::string>(root, "", "kind", "binary"));
  c.corpus = resolve(config_get<std::string>(root, "", "corpus", ""));
  c.max_sentences = config_get<std::size_t>(root, "", "max_sentences", c.max_sentences);
  auto& s = c.settings;
  s.features = feature_config_from(root);
  s.model = model_settings_from(root);
  s.binary_drop_space = config_get<bool>(root, "features", "binary_drop_space", s.binary_drop_space);
  s.folds = config_get<std::size_t>(root, "", "folds", s.folds);
  s.seed = config_get<std::uint64_t>(root, "", "seed", s.seed);
  s.jobs = config_get<unsigned>(root, "", "jobs", 1u);
  s.explain = config_get<bool>(root, "", "explain", s.explain);
  c.class_a = config_get<std::string>(root, "binary", "class_a", "");
  c.class_b = config_get<std::string>(root, "binary", "class_b", "");
  const char* class_section = c.kind == ExperimentKind::Pairwise ? "pairwise" : "multiclass";
  c.classes = config_get<std::vector<std::string>>(root, class_section, "classes", {});
  c.held_out = config_get<std::string>(root, "logo", "held_out", "");
  c.human = config_get<std::string>(root, "logo", "human", "");
  c.model_dir = resolve(config_get<std::string>(root, "external", "model_dir", ""));
  const auto as_class = config_get<std::string>(root, "external", "as_class", "");
  if (!as_class.empty()) c.as_class = as_class;
  c.out_dir = resolve(config_get<std::string>(root, "output", "dir", ""));
  c.save_models = config_get<bool>(root, "output", "save_models", false);
  s.keep_models = c.save_models;

  if (c.corpus.empty()) throw Error(ErrorCode::BadConfig, "corpus is required");
  if (c.kind == ExperimentKind::Binary && (c.class_a.empty() || c.class_b.empty())) {
    throw Error(ErrorCode::BadConfig, "binary.class_a and binary.class_b are required");
  }
  if (c.kind == ExperimentKind::LeaveOneOut && (c.held_out.empty() || c.human.empty())) {
    throw Error(ErrorCode::BadConfig, "logo.held_out and logo.human are required");
  }
  if (c.kind == ExperimentKind::External && c.model_dir.empty()) {
    throw Error(ErrorCode::BadConfig, "external.model_dir is required");
  }
  return c;
}

}  // namespace stylo
