#pragma once

// Generated annotated corpora for experiment-level tests. Every term gets one
// document per class; with `signal` > 0 each sentence of a class-c document
// carries the marker lemma "mark<c>" with that probability, with `signal` 0
// both classes come from the same distribution.

#include <random>
#include <string>
#include <vector>

#include "stylo/annotation.hpp"

namespace stylo::support {

struct SyntheticSpec {
  std::size_t terms = 50;
  std::vector<std::string> classes = {"human", "machine"};
  std::size_t sentences = 6;
  std::size_t tokens_per_sentence = 8;
  std::size_t vocabulary = 40;
  double signal = 1.0;
  std::uint64_t seed = 1;
};

inline Token make_token(const std::string& word, const std::string& upos, int head, const std::string& deprel) {
  Token t;
  t.surface = word;
  t.lemma = word;
  t.upos = upos;
  t.head = head;
  t.deprel = deprel;
  if (upos == "NOUN") t.morph = {"Number=Sing"};
  if (upos == "VERB") t.morph = {"Tense=Past", "VerbForm=Fin"};
  return t;
}

inline Sentence make_sentence(const std::vector<std::pair<std::string, std::string>>& words) {
  // First word is the root; everything else attaches to it.
  Sentence s;
  for (std::size_t i = 0; i < words.size(); ++i) {
    s.tokens.push_back(make_token(words[i].first, words[i].second, i == 0 ? 0 : 1, i == 0 ? "root" : "dep"));
  }
  if (!s.tokens.empty()) s.tokens.back().space_after = false;
  return s;
}

inline std::vector<AnnotatedDocument> synthetic_corpus(const SyntheticSpec& gen) {
  static const char* kTags[] = {"NOUN", "VERB", "ADJ", "DET", "ADP", "ADV", "PRON"};
  std::mt19937_64 rng(gen.seed);
  std::uniform_int_distribution<std::size_t> word(0, gen.vocabulary - 1);
  std::bernoulli_distribution marked(gen.signal);
  std::vector<AnnotatedDocument> docs;
  for (std::size_t t = 0; t < gen.terms; ++t) {
    for (std::size_t c = 0; c < gen.classes.size(); ++c) {
      AnnotatedDocument d;
      d.term = "term" + std::to_string(t);
      d.class_label = gen.classes[c];
      d.id = d.term + "_" + d.class_label;
      for (std::size_t s = 0; s < gen.sentences; ++s) {
        std::vector<std::pair<std::string, std::string>> words;
        for (std::size_t i = 0; i + 1 < gen.tokens_per_sentence; ++i) {
          const std::size_t w = word(rng);
          words.emplace_back("w" + std::to_string(w), kTags[w % 7]);
        }
        if (gen.signal > 0.0 && marked(rng)) {
          words[std::uniform_int_distribution<std::size_t>(0, words.size() - 1)(rng)] = {"mark" + std::to_string(c),
                                                                                         "NOUN"};
        }
        words.emplace_back(".", "PUNCT");
        Sentence sentence = make_sentence(words);
        sentence.tokens.back().head = 1;
        sentence.tokens.back().deprel = "punct";
        d.sentences.push_back(std::move(sentence));
      }
      docs.push_back(std::move(d));
    }
  }
  return docs;
}

}  // namespace stylo::support
