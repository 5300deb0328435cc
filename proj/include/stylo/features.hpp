#pragma once

// Normalized n-gram frequency features over four families:
//   LEMMA_NGRAM   lemma uni- to trigrams, windows touching a named entity skipped
//   POS_NGRAM     UPOS uni- to trigrams, windows touching a named entity or PUNCT skipped
//   DEP_BIGRAM    (dependent UPOS, relation, head UPOS) per non-root token
//   MORPH_UNIGRAM one key=value attribute of a non-PUNCT token
//
// A feature's value in a document is its count divided by the number of
// extracted keys of the same category and order in that document.

#include <algorithm>
#include <cctype>
#include <compare>
#include <cstdint>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "stylo/annotation.hpp"
#include "stylo/error.hpp"
#include "stylo/parallel.hpp"
#include "stylo/util.hpp"

namespace stylo {

enum class Category : std::uint8_t { LemmaNgram, PosNgram, DepBigram, MorphUnigram };

inline constexpr Category kAllCategories[] = {Category::LemmaNgram, Category::PosNgram, Category::DepBigram,
                                              Category::MorphUnigram};

std::string_view to_string(Category c);

Category parse_category(std::string_view name);

struct FeatureKey {
  Category category = Category::LemmaNgram;
  std::vector<std::string> parts;

  auto operator<=>(const FeatureKey&) const = default;
  bool operator==(const FeatureKey&) const = default;

  // Canonical `CAT:part1|part2|part3`; '\' and '|' inside parts are
  // backslash-escaped.
  std::string name() const {
    std::string out(to_string(category));
    out += ':';
    for (std::size_t i = 0; i < parts.size(); ++i) {
      if (i) out += '|';
      for (char c : parts[i]) {
        if (c == '|' || c == '\\') out += '\\';
        out += c;
      }
    }
    return out;
  }

  // (category, order) identifies the normalization family.
  std::pair<Category, std::size_t> family() const { return {category, parts.size()}; }
};

FeatureKey parse_feature_name(std::string_view name);

void check_key_shape(const FeatureKey& key);

using FeatureCounts = std::map<FeatureKey, std::size_t>;

// ---------------------------------------------------------------------------
// Extraction

// LEMMA_NGRAM and POS_NGRAM take n in 1..3; MORPH_UNIGRAM requires n = 1.
// Windows never cross sentence boundaries.
FeatureCounts extract_ngrams(const AnnotatedDocument& doc, Category category, std::size_t n);

FeatureCounts extract_dep_bigrams(const AnnotatedDocument& doc);

enum class SelectionMetric { Frequency, DocumentFrequency };

struct FeatureConfig {
  std::size_t size_limit = 3000;
  bool drop_space_features = false;
  bool drop_punct_features = false;
  SelectionMetric selection = SelectionMetric::Frequency;
  std::size_t max_lemma_n = 3;
  std::size_t max_pos_n = 3;
  bool dep_bigrams = true;
  bool morph_unigrams = true;
};

FeatureCounts extract_all(const AnnotatedDocument& doc, const FeatureConfig& config);

// ---------------------------------------------------------------------------
// Filters

bool part_is_punct(std::string_view part);

bool key_has_space(const FeatureKey& key);

// PUNCT in a tag position, or a lemma made only of punctuation characters.
bool key_has_punct(const FeatureKey& key);

// ---------------------------------------------------------------------------
// Vocabulary

class FeatureVocabulary {
 public:
  FeatureVocabulary() = default;

  FeatureVocabulary(std::vector<FeatureKey> keys, std::vector<std::size_t> counts, FeatureConfig config = {})
      : keys_(std::move(keys)), counts_(std::move(counts)), config_(std::move(config)) {
    if (keys_.size() != counts_.size()) throw Error(ErrorCode::ShapeMismatch, "vocabulary keys/counts differ");
    names_.reserve(keys_.size());
    for (std::size_t i = 0; i < keys_.size(); ++i) {
      check_key_shape(keys_[i]);
      names_.push_back(keys_[i].name());
      if (!index_.emplace(names_.back(), i).second) {
        throw Error(ErrorCode::BadFeatureName, "duplicate vocabulary key " + names_.back());
      }
    }
  }

  std::size_t size() const { return keys_.size(); }
  bool empty() const { return keys_.empty(); }
  const std::vector<FeatureKey>& keys() const { return keys_; }
  const std::vector<std::size_t>& counts() const { return counts_; }
  const std::vector<std::string>& names() const { return names_; }
  const FeatureConfig& config() const { return config_; }

  std::optional<std::size_t> index_of(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  // Hash of the ordered canonical names; models record it at training.
  std::string fingerprint() const {
    std::uint64_t h = fnv1a64("stylo-vocabulary");
    for (const auto& n : names_) {
      h = fnv1a64(n, h);
      h = fnv1a64("\n", h);
    }
    return hex64(h);
  }

 private:
  std::vector<FeatureKey> keys_;
  std::vector<std::size_t> counts_;
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::size_t> index_;
  FeatureConfig config_;
};

// Must be given training documents only. Counts aggregate over all families
// jointly; filters apply before truncation to `size_limit`; ordering is count
// descending then canonical name ascending.
FeatureVocabulary build_vocabulary(std::span<const AnnotatedDocument* const> train_docs, const FeatureConfig& config,
                                   unsigned jobs = 1);

std::vector<const AnnotatedDocument*> pointers_to(std::span<const AnnotatedDocument> docs);

FeatureVocabulary build_vocabulary(std::span<const AnnotatedDocument> train_docs, const FeatureConfig& config,
                                   unsigned jobs = 1);

// ---------------------------------------------------------------------------
// Vectorization

std::vector<double> vectorize(const AnnotatedDocument& doc, const FeatureVocabulary& vocab);

struct FeatureMatrix {
  std::vector<std::string> ids;
  std::vector<std::string> groups;
  std::vector<std::string> labels;
  std::vector<std::string> feature_names;
  std::vector<double> values;  // row-major, rows() x cols()

  std::size_t rows() const { return ids.size(); }
  std::size_t cols() const { return feature_names.size(); }
  std::span<const double> row(std::size_t i) const { return {values.data() + i * cols(), cols()}; }
  double at(std::size_t i, std::size_t j) const { return values[i * cols() + j]; }
};

FeatureMatrix build_matrix(std::span<const AnnotatedDocument* const> docs, const FeatureVocabulary& vocab,
                           unsigned jobs = 1);

FeatureMatrix build_matrix(std::span<const AnnotatedDocument> docs, const FeatureVocabulary& vocab, unsigned jobs = 1);

// ---------------------------------------------------------------------------
// I/O

nlohmann::json vocabulary_json(const FeatureVocabulary& vocab);

FeatureVocabulary vocabulary_from_json(const nlohmann::json& j, FeatureConfig config = {});

std::string matrix_csv(const FeatureMatrix& m);

FeatureMatrix parse_matrix_csv(std::string_view content);

}  // namespace stylo
