#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "stylo/features.hpp"
#include "support/synthetic.hpp"

using namespace stylo;

namespace {

struct T {
  const char* lemma;
  const char* upos;
  int head = 0;
  const char* deprel = "dep";
  bool ne = false;
  std::vector<std::string> morph = {};
};

Sentence sentence(std::vector<T> toks) {
  Sentence s;
  for (const auto& t : toks) {
    Token tok;
    tok.surface = t.lemma;
    tok.lemma = t.lemma;
    tok.upos = t.upos;
    tok.head = t.head;
    tok.deprel = t.deprel;
    tok.is_named_entity = t.ne;
    tok.morph = t.morph;
    s.tokens.push_back(tok);
  }
  return s;
}

AnnotatedDocument doc(std::vector<Sentence> sentences, std::string id = "d") {
  AnnotatedDocument d;
  d.id = std::move(id);
  d.term = "t";
  d.class_label = "human";
  d.sentences = std::move(sentences);
  return d;
}

FeatureKey key(Category c, std::vector<std::string> parts) { return FeatureKey{c, std::move(parts)}; }

FeatureConfig unigrams_only() {
  FeatureConfig c;
  c.max_lemma_n = 1;
  c.max_pos_n = 1;
  c.dep_bigrams = false;
  c.morph_unigrams = false;
  return c;
}

std::vector<AnnotatedDocument> corpus(std::uint64_t seed, std::size_t terms = 6) {
  support::SyntheticSpec gen;
  gen.terms = terms;
  gen.seed = seed;
  return support::synthetic_corpus(gen);
}

}  // namespace

TEST(Extract, PosBigramsOfDetNounVerb) {
  const auto d = doc({sentence({{"the", "DET", 2}, {"cat", "NOUN", 3}, {"sit", "VERB", 0}})});
  const FeatureCounts expected = {{key(Category::PosNgram, {"DET", "NOUN"}), 1},
                                  {key(Category::PosNgram, {"NOUN", "VERB"}), 1}};
  EXPECT_EQ(extract_ngrams(d, Category::PosNgram, 2), expected);
}

TEST(Extract, NamedEntitiesAreSkipped) {
  const auto d = doc({sentence({{"the", "DET", 2}, {"cat", "NOUN", 3, "nsubj", true}, {"sit", "VERB", 0}})});
  const FeatureCounts expected = {{key(Category::LemmaNgram, {"the"}), 1}, {key(Category::LemmaNgram, {"sit"}), 1}};
  EXPECT_EQ(extract_ngrams(d, Category::LemmaNgram, 1), expected);
  EXPECT_TRUE(extract_ngrams(d, Category::LemmaNgram, 2).empty());
  EXPECT_TRUE(extract_ngrams(d, Category::PosNgram, 3).empty());
}

TEST(Extract, WindowsStopAtSentenceBoundaries) {
  const auto d = doc({sentence({{"a", "X", 0}, {"b", "X", 1}}), sentence({{"c", "X", 0}})});
  const FeatureCounts expected = {{key(Category::LemmaNgram, {"a", "b"}), 1}};
  EXPECT_EQ(extract_ngrams(d, Category::LemmaNgram, 2), expected);
}

TEST(Extract, LemmasAreLowercasedAndPunctuationOnlyLeavesPos) {
  const auto d = doc({sentence({{"The", "DET", 2}, {"End", "NOUN", 0}, {".", "PUNCT", 2}})});
  const auto lemmas = extract_ngrams(d, Category::LemmaNgram, 3);
  EXPECT_EQ(lemmas.count(key(Category::LemmaNgram, {"the", "end", "."})), 1u);
  const auto pos = extract_ngrams(d, Category::PosNgram, 1);
  EXPECT_EQ(pos.count(key(Category::PosNgram, {"PUNCT"})), 0u);
  EXPECT_EQ(pos.size(), 2u);
}

TEST(Extract, SpaceTokensStayInPosNgrams) {
  const auto d = doc({sentence({{"a", "DET", 3}, {" ", "SPACE", 1}, {"b", "NOUN", 0}})});
  const auto pos = extract_ngrams(d, Category::PosNgram, 2);
  EXPECT_EQ(pos.count(key(Category::PosNgram, {"DET", "SPACE"})), 1u);
  EXPECT_EQ(extract_ngrams(d, Category::LemmaNgram, 1).count(key(Category::LemmaNgram, {"SPACE"})), 1u);
}

TEST(Extract, MorphUnigramsSkipPunct) {
  const auto d = doc({sentence({{"cats", "NOUN", 2, "nsubj", false, {"Number=Plur"}},
                                {"sleep", "VERB", 0, "root", false, {"Number=Plur", "Tense=Pres"}},
                                {".", "PUNCT", 2, "punct", false, {"PunctType=Peri"}}})});
  const FeatureCounts expected = {{key(Category::MorphUnigram, {"Number=Plur"}), 2},
                                  {key(Category::MorphUnigram, {"Tense=Pres"}), 1}};
  EXPECT_EQ(extract_ngrams(d, Category::MorphUnigram, 1), expected);
  EXPECT_THROW(extract_ngrams(d, Category::MorphUnigram, 2), Error);
  EXPECT_THROW(extract_ngrams(d, Category::LemmaNgram, 4), Error);
}

TEST(DepBigrams, CatsSleep) {
  const auto d = doc({sentence({{"cats", "NOUN", 2, "nsubj"}, {"sleep", "VERB", 0, "ROOT"}})});
  const FeatureCounts expected = {{key(Category::DepBigram, {"NOUN", "nsubj", "VERB"}), 1}};
  EXPECT_EQ(extract_dep_bigrams(d), expected);
}

TEST(DepBigrams, RootOnlyAndPunctuation) {
  EXPECT_TRUE(extract_dep_bigrams(doc({sentence({{"go", "VERB", 0}})})).empty());
  EXPECT_TRUE(extract_dep_bigrams(doc({sentence({{"go", "VERB", 0}, {"!", "PUNCT", 1, "punct"}})})).empty());
  // a dependent of a PUNCT head is skipped too
  EXPECT_TRUE(extract_dep_bigrams(doc({sentence({{"-", "PUNCT", 0}, {"x", "X", 1}})})).empty());
  EXPECT_TRUE(extract_dep_bigrams(doc({sentence({{"go", "VERB", 0}, {"Ann", "PROPN", 1, "nsubj", true}})})).empty());
}

TEST(Vocabulary, KeepsHighestCountsWithNameTieBreak) {
  // lemma unigram counts: a=3, b=2, c=2, d=1, e=1
  const std::vector<AnnotatedDocument> docs = {
      doc({sentence({{"a", "X", 0}, {"a", "X", 1}, {"b", "X", 1}, {"c", "X", 1}})}, "1"),
      doc({sentence({{"a", "X", 0}, {"c", "X", 1}, {"b", "X", 1}, {"d", "X", 1}, {"e", "X", 1}})}, "2")};
  FeatureConfig config = unigrams_only();
  config.max_pos_n = 0;
  config.size_limit = 3;
  const auto vocab = build_vocabulary(docs, config);
  EXPECT_EQ(vocab.names(), (std::vector<std::string>{"LEMMA_NGRAM:a", "LEMMA_NGRAM:b", "LEMMA_NGRAM:c"}));
  EXPECT_EQ(vocab.counts(), (std::vector<std::size_t>{3, 2, 2}));

  config.size_limit = 4;
  EXPECT_EQ(build_vocabulary(docs, config).names().back(), "LEMMA_NGRAM:d");
}

TEST(Vocabulary, DocumentFrequencySelection) {
  const std::vector<AnnotatedDocument> docs = {doc({sentence({{"a", "X", 0}, {"a", "X", 1}, {"a", "X", 1}})}, "1"),
                                               doc({sentence({{"b", "X", 0}})}, "2"),
                                               doc({sentence({{"b", "X", 0}})}, "3")};
  FeatureConfig config = unigrams_only();
  config.max_pos_n = 0;
  config.selection = SelectionMetric::DocumentFrequency;
  const auto vocab = build_vocabulary(docs, config);
  EXPECT_EQ(vocab.names().front(), "LEMMA_NGRAM:b");
  EXPECT_EQ(vocab.counts(), (std::vector<std::size_t>{2, 1}));
}

TEST(Vocabulary, FiltersApplyBeforeTruncation) {
  const auto docs = parse_conllu(read_file(std::string(STYLO_TEST_DATA) + "/mini.conllu"));
  FeatureConfig config;
  const auto full = build_vocabulary(docs, config);
  EXPECT_TRUE(std::any_of(full.keys().begin(), full.keys().end(), key_has_space));

  config.drop_space_features = true;
  config.drop_punct_features = true;
  config.size_limit = 25;
  const auto filtered = build_vocabulary(docs, config);
  EXPECT_EQ(filtered.size(), 25u);
  for (const auto& k : filtered.keys()) {
    EXPECT_FALSE(key_has_space(k)) << k.name();
    EXPECT_FALSE(key_has_punct(k)) << k.name();
  }
}

TEST(Vocabulary, EmptyAfterFiltersIsAnError) {
  const std::vector<AnnotatedDocument> docs = {doc({sentence({{".", "PUNCT", 0}})})};
  FeatureConfig config = unigrams_only();
  config.drop_punct_features = true;
  try {
    build_vocabulary(docs, config);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyVocabulary);
  }
  EXPECT_THROW(build_vocabulary(std::vector<AnnotatedDocument>{}, FeatureConfig{}), Error);
}

TEST(Vocabulary, OrderingInvariants) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    FeatureConfig config;
    config.size_limit = 200;
    const auto vocab = build_vocabulary(corpus(seed), config, 3);
    ASSERT_LE(vocab.size(), 200u);
    for (std::size_t i = 1; i < vocab.size(); ++i) {
      const bool ordered = vocab.counts()[i - 1] > vocab.counts()[i] ||
                           (vocab.counts()[i - 1] == vocab.counts()[i] && vocab.names()[i - 1] < vocab.names()[i]);
      EXPECT_TRUE(ordered) << vocab.names()[i - 1] << " / " << vocab.names()[i];
    }
  }
}

TEST(Vocabulary, UnaffectedByTestDocuments) {
  auto docs = corpus(9, 10);
  std::vector<const AnnotatedDocument*> train;
  for (std::size_t i = 0; i < docs.size(); i += 2) train.push_back(&docs[i]);
  const auto before = build_vocabulary(train, FeatureConfig{});

  std::mt19937_64 rng(3);
  for (std::size_t i = 1; i < docs.size(); i += 2) {
    for (auto& s : docs[i].sentences) {
      for (auto& t : s.tokens) t.lemma = "leak" + std::to_string(rng() % 5);
    }
  }
  const auto after = build_vocabulary(train, FeatureConfig{});
  EXPECT_EQ(before.names(), after.names());
  EXPECT_EQ(before.counts(), after.counts());
  EXPECT_EQ(before.fingerprint(), after.fingerprint());
}

TEST(Vectorize, RelativeFrequencyWithinFamily) {
  const auto d = doc({sentence({{"dog", "NOUN", 3}, {"cat", "NOUN", 3}, {"run", "VERB", 0}})});
  const auto vocab = build_vocabulary(std::vector<AnnotatedDocument>{d}, unigrams_only());
  const auto row = vectorize(d, vocab);
  EXPECT_DOUBLE_EQ(row[*vocab.index_of("POS_NGRAM:NOUN")], 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(row[*vocab.index_of("LEMMA_NGRAM:dog")], 1.0 / 3.0);

  const auto other = doc({sentence({{"bird", "NOUN", 0}})});
  EXPECT_EQ(vectorize(other, vocab)[*vocab.index_of("POS_NGRAM:VERB")], 0.0);
  EXPECT_EQ(vectorize(doc({}), vocab), std::vector<double>(vocab.size(), 0.0));
}

TEST(Vectorize, FamiliesSumToOneOverFullKeySet) {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const auto docs = corpus(seed, 4);
    FeatureConfig config;
    config.size_limit = 1000000;
    const auto vocab = build_vocabulary(docs, config);
    for (const auto& d : docs) {
      const auto row = vectorize(d, vocab);
      std::map<std::pair<Category, std::size_t>, double> sums;
      for (std::size_t j = 0; j < row.size(); ++j) {
        EXPECT_GE(row[j], 0.0);
        EXPECT_LE(row[j], 1.0);
        sums[vocab.keys()[j].family()] += row[j];
      }
      for (const auto& [family, sum] : sums) {
        if (sum > 0) {
          EXPECT_NEAR(sum, 1.0, 1e-9);
        }
      }
    }
  }
}

TEST(Vectorize, SingleSourceDocumentUnigramsSumToOne) {
  const auto d = corpus(2, 1).front();
  const auto vocab = build_vocabulary(std::vector<AnnotatedDocument>{d}, unigrams_only());
  const auto row = vectorize(d, vocab);
  double lemma = 0, pos = 0;
  for (std::size_t j = 0; j < row.size(); ++j) {
    (vocab.keys()[j].category == Category::LemmaNgram ? lemma : pos) += row[j];
  }
  EXPECT_NEAR(lemma, 1.0, 1e-12);
  EXPECT_NEAR(pos, 1.0, 1e-12);
}

TEST(Matrix, IndependentOfDocumentOrderAndThreads) {
  auto docs = corpus(4, 8);
  const auto vocab = build_vocabulary(docs, FeatureConfig{});
  const auto m1 = build_matrix(docs, vocab, 1);
  std::reverse(docs.begin(), docs.end());
  const auto m2 = build_matrix(docs, vocab, 4);
  ASSERT_EQ(m1.rows(), m2.rows());
  for (std::size_t i = 0; i < m1.rows(); ++i) {
    const std::size_t r = m1.rows() - 1 - i;
    EXPECT_EQ(m1.ids[i], m2.ids[r]);
    EXPECT_TRUE(std::equal(m1.row(i).begin(), m1.row(i).end(), m2.row(r).begin()));
  }
}

TEST(Matrix, CsvRoundTrip) {
  const auto docs = corpus(5, 3);
  const auto vocab = build_vocabulary(docs, FeatureConfig{});
  const auto m = build_matrix(docs, vocab);
  const auto back = parse_matrix_csv(matrix_csv(m));
  EXPECT_EQ(back.ids, m.ids);
  EXPECT_EQ(back.groups, m.groups);
  EXPECT_EQ(back.labels, m.labels);
  EXPECT_EQ(back.feature_names, m.feature_names);
  EXPECT_EQ(back.values, m.values);
  EXPECT_THROW(parse_matrix_csv("a,b\n"), Error);
  EXPECT_THROW(parse_matrix_csv("id,group,label,x\nd,g,l\n"), Error);
}

TEST(Names, EscapingRoundTrips) {
  const std::vector<FeatureKey> keys = {key(Category::LemmaNgram, {"a|b", "c\\d", "e"}),
                                        key(Category::DepBigram, {"NOUN", "nsubj", "VERB"}),
                                        key(Category::MorphUnigram, {"Number=Plur"}), key(Category::PosNgram, {""})};
  for (const auto& k : keys) EXPECT_EQ(parse_feature_name(k.name()), k);
  EXPECT_EQ(keys[0].name(), "LEMMA_NGRAM:a\\|b|c\\\\d|e");
  EXPECT_THROW(parse_feature_name("nocategory"), Error);
  EXPECT_THROW(parse_feature_name("CHAR_NGRAM:x"), Error);
}

TEST(Names, VocabularyJsonRoundTripKeepsFingerprint) {
  const auto vocab = build_vocabulary(corpus(6, 3), FeatureConfig{});
  const auto back = vocabulary_from_json(nlohmann::json::parse(vocabulary_json(vocab).dump()));
  EXPECT_EQ(back.names(), vocab.names());
  EXPECT_EQ(back.counts(), vocab.counts());
  EXPECT_EQ(back.fingerprint(), vocab.fingerprint());
  EXPECT_THROW(vocabulary_from_json(nlohmann::json::parse(R"([{"category":"DEP_BIGRAM","parts":["a"],"count":1}])")),
               Error);
  EXPECT_THROW(vocabulary_from_json(nlohmann::json::object()), Error);
}
