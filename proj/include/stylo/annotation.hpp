#pragma once

// Token model and CoNLL-U reading/writing.
//
// Document metadata travels in comment lines that open each document:
//
//   # newdoc id = <id>
//   # term = <grouping term>
//   # class_label = <generator>
//   # prompt_id = <int>            (optional)
//   # annotator = <name>@<version> (optional)
//
// Named entities and whitespace are carried in MISC as `NE=Yes` and
// `SpaceAfter=No`. Enhanced-dependency empty nodes (`3.1` ids) are skipped.

#include <charconv>
#include <cstddef>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "stylo/error.hpp"
#include "stylo/util.hpp"

namespace stylo {

inline constexpr std::string_view kPunctTag = "PUNCT";
inline constexpr std::string_view kSpaceTag = "SPACE";

struct Token {
  std::string surface;
  std::string lemma;
  std::string upos;
  std::string xpos = "_";
  std::vector<std::string> morph;  // "Key=Value" items, file order
  int head = 0;                    // 1-based sentence index, 0 = ROOT
  std::string deprel;
  std::string deps = "_";
  bool is_named_entity = false;
  bool space_after = true;
  std::vector<std::string> misc;  // MISC items other than NE / SpaceAfter

  bool is_punct() const { return upos == kPunctTag; }
  bool is_space() const { return upos == kSpaceTag; }

  bool operator==(const Token&) const = default;
};

// A `first-last` multiword range line, kept verbatim so files round-trip.
struct MultiwordToken {
  int first = 0;
  std::string line;

  bool operator==(const MultiwordToken&) const = default;
};

struct Sentence {
  std::vector<std::string> comments;  // without the leading "# "
  std::vector<Token> tokens;
  std::vector<MultiwordToken> multiword;

  bool operator==(const Sentence&) const = default;
};

struct AnnotatedDocument {
  std::string id;
  std::string term;
  std::string class_label;
  std::optional<int> prompt_id;
  std::vector<std::pair<std::string, std::string>> metadata;  // extra doc-level keys
  std::vector<Sentence> sentences;

  bool operator==(const AnnotatedDocument&) const = default;
};

std::size_t sentence_count(const AnnotatedDocument& doc);

// SPACE tokens count as tokens but never as punctuation.
std::size_t token_count(const AnnotatedDocument& doc, bool include_punct = true);

std::size_t punct_count(const AnnotatedDocument& doc);

std::vector<AnnotatedDocument> parse_conllu(std::istream& in);

std::vector<AnnotatedDocument> parse_conllu(std::string_view text);

std::string serialize_conllu(const std::vector<AnnotatedDocument>& docs);

// Surface text reconstructed from tokens and SpaceAfter flags, with the
// code-point span of every token (sentence-major order).
struct DocumentText {
  std::string text;
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> spans;
};

DocumentText reconstruct_text(const AnnotatedDocument& doc);

}  // namespace stylo
