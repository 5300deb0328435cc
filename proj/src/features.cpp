#include "stylo/features.hpp"

namespace stylo {

namespace {

std::string lemma_part(const Token& t) {
  if (t.is_space()) return std::string(kSpaceTag);
  return to_lower_ascii(t.lemma);
}

}  // namespace

std::string_view to_string(Category c) {
  switch (c) {
    case Category::LemmaNgram:
      return "LEMMA_NGRAM";
    case Category::PosNgram:
      return "POS_NGRAM";
    case Category::DepBigram:
      return "DEP_BIGRAM";
    case Category::MorphUnigram:
      return "MORPH_UNIGRAM";
  }
  return "";
}

Category parse_category(std::string_view name) {
  for (Category c : kAllCategories) {
    if (to_string(c) == name) return c;
  }
  throw Error(ErrorCode::BadFeatureName, "unknown feature category '" + std::string(name) + "'");
}

FeatureKey parse_feature_name(std::string_view name) {
  const auto colon = name.find(':');
  if (colon == std::string_view::npos) {
    throw Error(ErrorCode::BadFeatureName, "feature name without category: '" + std::string(name) + "'");
  }
  FeatureKey key;
  key.category = parse_category(name.substr(0, colon));
  std::string cur;
  for (std::size_t i = colon + 1; i < name.size(); ++i) {
    if (name[i] == '\\' && i + 1 < name.size()) {
      cur += name[++i];
    } else if (name[i] == '|') {
      key.parts.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += name[i];
    }
  }
  key.parts.push_back(std::move(cur));
  return key;
}

void check_key_shape(const FeatureKey& key) {
  const std::size_t n = key.parts.size();
  const bool ok = (key.category == Category::DepBigram && n == 3) ||
                  (key.category == Category::MorphUnigram && n == 1) ||
                  ((key.category == Category::LemmaNgram || key.category == Category::PosNgram) && n >= 1 && n <= 3);
  if (!ok) throw Error(ErrorCode::BadFeatureName, "bad arity for " + key.name());
}

FeatureCounts extract_ngrams(const AnnotatedDocument& doc, Category category, std::size_t n) {
  FeatureCounts counts;
  if (category == Category::MorphUnigram) {
    if (n != 1) throw Error(ErrorCode::BadConfig, "MORPH_UNIGRAM supports n = 1 only");
    for (const auto& s : doc.sentences) {
      for (const auto& t : s.tokens) {
        if (t.is_punct()) continue;
        for (const auto& attr : t.morph) ++counts[FeatureKey{category, {attr}}];
      }
    }
    return counts;
  }
  if (category == Category::DepBigram) throw Error(ErrorCode::BadConfig, "use extract_dep_bigrams");
  if (n < 1 || n > 3) throw Error(ErrorCode::BadConfig, "n-gram order must be 1..3");

  const bool is_pos = category == Category::PosNgram;
  for (const auto& s : doc.sentences) {
    const auto& toks = s.tokens;
    if (toks.size() < n) continue;
    for (std::size_t i = 0; i + n <= toks.size(); ++i) {
      bool skip = false;
      for (std::size_t j = i; j < i + n && !skip; ++j) {
        skip = toks[j].is_named_entity || (is_pos && toks[j].is_punct());
      }
      if (skip) continue;
      FeatureKey key{category, {}};
      key.parts.reserve(n);
      for (std::size_t j = i; j < i + n; ++j) {
        key.parts.push_back(is_pos ? toks[j].upos : lemma_part(toks[j]));
      }
      ++counts[std::move(key)];
    }
  }
  return counts;
}

FeatureCounts extract_dep_bigrams(const AnnotatedDocument& doc) {
  FeatureCounts counts;
  for (const auto& s : doc.sentences) {
    for (const auto& t : s.tokens) {
      if (t.head == 0 || t.is_named_entity || t.is_punct()) continue;
      const Token& head = s.tokens[static_cast<std::size_t>(t.head - 1)];
      if (head.is_punct()) continue;
      ++counts[FeatureKey{Category::DepBigram, {t.upos, t.deprel, head.upos}}];
    }
  }
  return counts;
}

FeatureCounts extract_all(const AnnotatedDocument& doc, const FeatureConfig& config) {
  FeatureCounts all;
  auto merge = [&](FeatureCounts&& part) {
    for (auto& [k, v] : part) all[k] += v;
  };
  for (std::size_t n = 1; n <= config.max_lemma_n; ++n) merge(extract_ngrams(doc, Category::LemmaNgram, n));
  for (std::size_t n = 1; n <= config.max_pos_n; ++n) merge(extract_ngrams(doc, Category::PosNgram, n));
  if (config.dep_bigrams) merge(extract_dep_bigrams(doc));
  if (config.morph_unigrams) merge(extract_ngrams(doc, Category::MorphUnigram, 1));
  return all;
}

bool part_is_punct(std::string_view part) {
  if (part == kPunctTag) return true;
  if (part.empty()) return false;
  return std::all_of(part.begin(), part.end(), [](char c) {
    const auto u = static_cast<unsigned char>(c);
    return u < 0x80 && std::ispunct(u);
  });
}

bool key_has_space(const FeatureKey& key) {
  return std::any_of(key.parts.begin(), key.parts.end(), [](const std::string& p) { return p == kSpaceTag; });
}

bool key_has_punct(const FeatureKey& key) {
  return std::any_of(key.parts.begin(), key.parts.end(), [](const std::string& p) { return part_is_punct(p); });
}

FeatureVocabulary build_vocabulary(std::span<const AnnotatedDocument* const> train_docs, const FeatureConfig& config,
                                   unsigned jobs) {
  if (train_docs.empty()) throw Error(ErrorCode::EmptyVocabulary, "no training documents");
  std::vector<FeatureCounts> per_doc(train_docs.size());
  parallel_for(train_docs.size(), jobs, [&](std::size_t i) { per_doc[i] = extract_all(*train_docs[i], config); });

  std::map<FeatureKey, std::size_t> totals;
  for (const auto& counts : per_doc) {
    for (const auto& [key, count] : counts) {
      totals[key] += config.selection == SelectionMetric::Frequency ? count : 1;
    }
  }

  struct Entry {
    std::string name;
    const FeatureKey* key;
    std::size_t count;
  };
  std::vector<Entry> entries;
  entries.reserve(totals.size());
  for (const auto& [key, count] : totals) {
    if (config.drop_space_features && key_has_space(key)) continue;
    if (config.drop_punct_features && key_has_punct(key)) continue;
    entries.push_back({key.name(), &key, count});
  }
  if (entries.empty()) throw Error(ErrorCode::EmptyVocabulary, "filters removed every feature");

  const std::size_t keep = std::min(entries.size(), config.size_limit);
  auto better = [](const Entry& a, const Entry& b) {
    if (a.count != b.count) return a.count > b.count;
    return a.name < b.name;
  };
  std::partial_sort(entries.begin(), entries.begin() + static_cast<std::ptrdiff_t>(keep), entries.end(), better);
  entries.resize(keep);

  std::vector<FeatureKey> keys;
  std::vector<std::size_t> counts;
  for (const auto& e : entries) {
    keys.push_back(*e.key);
    counts.push_back(e.count);
  }
  return FeatureVocabulary(std::move(keys), std::move(counts), config);
}

std::vector<const AnnotatedDocument*> pointers_to(std::span<const AnnotatedDocument> docs) {
  std::vector<const AnnotatedDocument*> ptrs;
  ptrs.reserve(docs.size());
  for (const auto& d : docs) ptrs.push_back(&d);
  return ptrs;
}

FeatureVocabulary build_vocabulary(std::span<const AnnotatedDocument> train_docs, const FeatureConfig& config,
                                   unsigned jobs) {
  const auto ptrs = pointers_to(train_docs);
  return build_vocabulary(std::span<const AnnotatedDocument* const>(ptrs), config, jobs);
}

std::vector<double> vectorize(const AnnotatedDocument& doc, const FeatureVocabulary& vocab) {
  const FeatureCounts counts = extract_all(doc, vocab.config());
  std::map<std::pair<Category, std::size_t>, std::size_t> family_totals;
  for (const auto& [key, count] : counts) family_totals[key.family()] += count;

  std::vector<double> row(vocab.size(), 0.0);
  for (std::size_t j = 0; j < vocab.size(); ++j) {
    const auto& key = vocab.keys()[j];
    auto it = counts.find(key);
    if (it == counts.end()) continue;
    row[j] = static_cast<double>(it->second) / static_cast<double>(family_totals.at(key.family()));
  }
  return row;
}

FeatureMatrix build_matrix(std::span<const AnnotatedDocument* const> docs, const FeatureVocabulary& vocab,
                           unsigned jobs) {
  FeatureMatrix m;
  m.feature_names = vocab.names();
  m.values.assign(docs.size() * vocab.size(), 0.0);
  for (const auto* d : docs) {
    m.ids.push_back(d->id);
    m.groups.push_back(d->term);
    m.labels.push_back(d->class_label);
  }
  parallel_for(docs.size(), jobs, [&](std::size_t i) {
    auto row = vectorize(*docs[i], vocab);
    std::copy(row.begin(), row.end(), m.values.begin() + static_cast<std::ptrdiff_t>(i * vocab.size()));
  });
  return m;
}

FeatureMatrix build_matrix(std::span<const AnnotatedDocument> docs, const FeatureVocabulary& vocab, unsigned jobs) {
  const auto ptrs = pointers_to(docs);
  return build_matrix(std::span<const AnnotatedDocument* const>(ptrs), vocab, jobs);
}

nlohmann::json vocabulary_json(const FeatureVocabulary& vocab) {
  nlohmann::json arr = nlohmann::json::array();
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    arr.push_back({{"category", to_string(vocab.keys()[i].category)},
                   {"parts", vocab.keys()[i].parts},
                   {"count", vocab.counts()[i]}});
  }
  return arr;
}

FeatureVocabulary vocabulary_from_json(const nlohmann::json& j, FeatureConfig config) {
  if (!j.is_array()) throw Error(ErrorCode::BadFeatureName, "vocabulary must be a JSON array");
  std::vector<FeatureKey> keys;
  std::vector<std::size_t> counts;
  for (const auto& e : j) {
    try {
      FeatureKey key;
      key.category = parse_category(e.at("category").get<std::string>());
      key.parts = e.at("parts").get<std::vector<std::string>>();
      keys.push_back(std::move(key));
      counts.push_back(e.at("count").get<std::size_t>());
    } catch (const nlohmann::json::exception& ex) {
      throw Error(ErrorCode::BadFeatureName, std::string("vocabulary entry: ") + ex.what());
    }
  }
  return FeatureVocabulary(std::move(keys), std::move(counts), std::move(config));
}

std::string matrix_csv(const FeatureMatrix& m) {
  std::string out = "id,group,label";
  for (const auto& n : m.feature_names) out += ',' + csv_field(n);
  out += '\n';
  for (std::size_t i = 0; i < m.rows(); ++i) {
    out += csv_field(m.ids[i]) + ',' + csv_field(m.groups[i]) + ',' + csv_field(m.labels[i]);
    for (double v : m.row(i)) out += ',' + format_double(v);
    out += '\n';
  }
  return out;
}

FeatureMatrix parse_matrix_csv(std::string_view content) {
  FeatureMatrix m;
  std::size_t start = 0;
  std::size_t line_no = 0;
  while (start < content.size()) {
    std::size_t end = content.find('\n', start);
    if (end == std::string_view::npos) end = content.size();
    const std::string_view line = content.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (line.empty()) continue;
    auto fields = csv_split(line);
    const std::string where = "matrix line " + std::to_string(line_no);
    if (line_no == 1) {
      if (fields.size() < 3 || fields[0] != "id" || fields[1] != "group" || fields[2] != "label") {
        throw Error(ErrorCode::ShapeMismatch, "matrix header must start with id,group,label");
      }
      m.feature_names.assign(fields.begin() + 3, fields.end());
      continue;
    }
    if (fields.size() != m.cols() + 3) throw Error(ErrorCode::ShapeMismatch, where + ": wrong column count");
    m.ids.push_back(fields[0]);
    m.groups.push_back(fields[1]);
    m.labels.push_back(fields[2]);
    for (std::size_t j = 3; j < fields.size(); ++j) {
      m.values.push_back(parse_double(fields[j], ErrorCode::ShapeMismatch, where));
    }
  }
  return m;
}

}  // namespace stylo
