#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "stylo/annotation.hpp"
#include "stylo/error.hpp"
#include "stylo/util.hpp"

namespace stylo {

struct RawDocument {
  std::string id;
  std::string term;
  std::string class_label;
  std::optional<int> prompt_id;
  std::string text;
  std::string conllu_path;  // set instead of `text` for pre-annotated entries

  bool operator==(const RawDocument&) const = default;
};

struct ValidationRules {
  std::size_t min_chars = 1100;
  std::size_t min_sentences = 10;
  std::size_t max_sentences = 18;
  std::vector<std::string> reference_markers = {"References", "Bibliography", "ISBN", "doi:"};
};

struct CleanOptions {
  std::string retained_punctuation = ".,:'\"?!%-";
};

enum class RejectReason { TooShortChars, TooFewSentences, ContainsReferences, DuplicateId, DuplicateTerm };

std::string_view to_string(RejectReason reason);

// ---------------------------------------------------------------------------
// Cleaning

// Keeps Latin letters, ASCII digits, whitespace and the retained punctuation;
// collapses whitespace runs to one space and trims the ends.
std::string clean_text(std::string_view raw, const CleanOptions& options = {});

// Counts every non-whitespace code point.
std::size_t count_text_chars(std::string_view text);

// Rule-based sentence splitter for raw text that has not been through the
// annotator yet: a sentence ends at . ? or ! followed by whitespace and an
// uppercase letter or digit, or at end of text.
std::vector<std::string> split_sentences(std::string_view text);

bool contains_reference_marker(std::string_view sentence, const ValidationRules& rules);

// Returns the first failing rule, or nullopt when the document is accepted.
// `leading_sentences` are the document's first sentences as text; references
// are looked for in the first `min_sentences` of them. When none are given the
// whole text is scanned.
std::optional<RejectReason> validate(const RawDocument& doc, std::size_t sentence_count, const ValidationRules& rules,
                                     std::span<const std::string> leading_sentences = {});

AnnotatedDocument truncate(AnnotatedDocument doc, std::size_t max_sentences);

// Validation of an already annotated document: characters are counted on the
// text rebuilt from its tokens, references looked for in its leading sentences.
std::optional<RejectReason> validate_annotated(const AnnotatedDocument& doc, const ValidationRules& rules);

// ---------------------------------------------------------------------------
// Statistics

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;
};

// Population standard deviation.
MeanSd mean_sd(std::span<const double> values);

struct ClassStats {
  std::size_t documents = 0;
  MeanSd token_count;
  MeanSd punctuation_fraction;  // percent
  MeanSd tokens_per_sentence;
  MeanSd sentences_per_doc;
  std::size_t max_sentences = 0;
};

struct CorpusStats {
  std::map<std::string, ClassStats> per_class;
};

// `declared_labels` lists classes that must be present; empty means "whatever
// labels occur".
CorpusStats corpus_stats(std::span<const AnnotatedDocument> corpus, std::span<const std::string> declared_labels = {});

std::string stats_csv(const CorpusStats& stats);

// ---------------------------------------------------------------------------
// Manifest (JSON lines)

RawDocument manifest_entry(const nlohmann::json& j, bool strict, std::size_t line_no);

std::vector<RawDocument> parse_manifest(std::string_view content, bool strict = false);

nlohmann::json manifest_json(const RawDocument& doc);

std::string serialize_manifest(std::span<const RawDocument> docs);

// ---------------------------------------------------------------------------
// Preprocessing pipeline over raw manifests

struct Rejection {
  std::string id;
  RejectReason reason;
};

struct PreprocessResult {
  std::vector<RawDocument> accepted;
  std::vector<Rejection> rejected;
};

// clean -> validate -> truncate to rules.max_sentences. Documents repeating an
// id, or a (term, class, prompt) triple, are rejected after the first.
PreprocessResult preprocess(std::span<const RawDocument> docs, const ValidationRules& rules,
                            const CleanOptions& clean = {});

}  // namespace stylo
