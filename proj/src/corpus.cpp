#include "stylo/corpus.hpp"

namespace stylo {

namespace {

// Latin script letters: ASCII, Latin-1 Supplement and Latin Extended-A/B,
// IPA extensions excluded, plus Latin Extended Additional.
bool is_latin_letter(char32_t cp) {
  if ((cp >= U'a' && cp <= U'z') || (cp >= U'A' && cp <= U'Z')) return true;
  if (cp >= 0xC0 && cp <= 0x24F) return cp != 0xD7 && cp != 0xF7;
  return cp >= 0x1E00 && cp <= 0x1EFF;
}

}  // namespace

std::string_view to_string(RejectReason reason) {
  switch (reason) {
    case RejectReason::TooShortChars:
      return "TooShortChars";
    case RejectReason::TooFewSentences:
      return "TooFewSentences";
    case RejectReason::ContainsReferences:
      return "ContainsReferences";
    case RejectReason::DuplicateId:
      return "DuplicateId";
    case RejectReason::DuplicateTerm:
      return "DuplicateTerm";
  }
  return "Unknown";
}

std::string clean_text(std::string_view raw, const CleanOptions& options) {
  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  for (std::size_t pos = 0; pos < raw.size();) {
    const char32_t cp = utf8_next(raw, pos);
    if (is_unicode_space(cp)) {
      pending_space = true;
      continue;
    }
    const bool keep = is_latin_letter(cp) || (cp >= U'0' && cp <= U'9') ||
                      (cp < 0x80 && options.retained_punctuation.find(static_cast<char>(cp)) != std::string::npos);
    if (!keep) continue;
    if (pending_space && !out.empty()) out.push_back(' ');
    pending_space = false;
    utf8_append(out, cp);
  }
  return out;
}

std::size_t count_text_chars(std::string_view text) {
  std::size_t n = 0;
  for (std::size_t pos = 0; pos < text.size();) {
    if (!is_unicode_space(utf8_next(text, pos))) ++n;
  }
  return n;
}

std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> sentences;
  std::size_t start = 0;
  auto push = [&](std::size_t end) {
    std::string_view s = text.substr(start, end - start);
    while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
    while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
    if (!s.empty()) sentences.emplace_back(s);
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c != '.' && c != '?' && c != '!') continue;
    std::size_t j = i + 1;
    while (j < text.size() &&
           (text[j] == '.' || text[j] == '?' || text[j] == '!' || text[j] == '"' || text[j] == '\'')) {
      ++j;
    }
    if (j >= text.size()) break;
    if (text[j] != ' ' && text[j] != '\n') continue;
    std::size_t k = j;
    while (k < text.size() && (text[k] == ' ' || text[k] == '\n')) ++k;
    if (k < text.size() && ((text[k] >= 'A' && text[k] <= 'Z') || (text[k] >= '0' && text[k] <= '9') ||
                            static_cast<unsigned char>(text[k]) >= 0xC0 || text[k] == '"')) {
      push(j);
      start = j;
      i = j - 1;
    }
  }
  push(text.size());
  return sentences;
}

bool contains_reference_marker(std::string_view sentence, const ValidationRules& rules) {
  return std::any_of(rules.reference_markers.begin(), rules.reference_markers.end(),
                     [&](const std::string& m) { return !m.empty() && sentence.find(m) != std::string_view::npos; });
}

std::optional<RejectReason> validate(const RawDocument& doc, std::size_t sentence_count, const ValidationRules& rules,
                                     std::span<const std::string> leading_sentences) {
  if (count_text_chars(doc.text) < rules.min_chars) return RejectReason::TooShortChars;
  if (sentence_count < rules.min_sentences) return RejectReason::TooFewSentences;
  if (leading_sentences.empty()) {
    if (contains_reference_marker(doc.text, rules)) return RejectReason::ContainsReferences;
  } else {
    const std::size_t n = std::min(leading_sentences.size(), rules.min_sentences);
    for (std::size_t i = 0; i < n; ++i) {
      if (contains_reference_marker(leading_sentences[i], rules)) return RejectReason::ContainsReferences;
    }
  }
  return std::nullopt;
}

AnnotatedDocument truncate(AnnotatedDocument doc, std::size_t max_sentences) {
  if (doc.sentences.size() > max_sentences) doc.sentences.resize(max_sentences);
  return doc;
}

std::optional<RejectReason> validate_annotated(const AnnotatedDocument& doc, const ValidationRules& rules) {
  RawDocument raw;
  raw.id = doc.id;
  raw.text = reconstruct_text(doc).text;
  std::vector<std::string> leading;
  for (std::size_t i = 0; i < doc.sentences.size() && i < rules.min_sentences; ++i) {
    std::string s;
    for (const auto& t : doc.sentences[i].tokens) {
      s += t.surface;
      if (t.space_after) s += ' ';
    }
    leading.push_back(std::move(s));
  }
  if (leading.empty()) leading.emplace_back();
  return validate(raw, sentence_count(doc), rules, leading);
}

MeanSd mean_sd(std::span<const double> values) {
  MeanSd r;
  if (values.empty()) return r;
  double sum = 0.0;
  for (double v : values) sum += v;
  r.mean = sum / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - r.mean) * (v - r.mean);
  r.sd = std::sqrt(ss / static_cast<double>(values.size()));
  return r;
}

CorpusStats corpus_stats(std::span<const AnnotatedDocument> corpus, std::span<const std::string> declared_labels) {
  std::map<std::string, std::vector<const AnnotatedDocument*>> by_class;
  for (const auto& label : declared_labels) by_class[label];
  for (const auto& doc : corpus) by_class[doc.class_label].push_back(&doc);

  CorpusStats stats;
  for (const auto& [label, docs] : by_class) {
    if (docs.empty()) throw Error(ErrorCode::EmptyClass, "no documents for class '" + label + "'");
    std::vector<double> tokens, punct, per_sentence, sentences;
    ClassStats cs;
    cs.documents = docs.size();
    for (const auto* doc : docs) {
      const auto n_tokens = static_cast<double>(token_count(*doc));
      const auto n_sent = static_cast<double>(sentence_count(*doc));
      if (n_tokens == 0 || n_sent == 0) {
        throw Error(ErrorCode::EmptyClass, "document '" + doc->id + "' is empty");
      }
      tokens.push_back(n_tokens);
      punct.push_back(100.0 * static_cast<double>(punct_count(*doc)) / n_tokens);
      per_sentence.push_back(n_tokens / n_sent);
      sentences.push_back(n_sent);
      cs.max_sentences = std::max(cs.max_sentences, sentence_count(*doc));
    }
    cs.token_count = mean_sd(tokens);
    cs.punctuation_fraction = mean_sd(punct);
    cs.tokens_per_sentence = mean_sd(per_sentence);
    cs.sentences_per_doc = mean_sd(sentences);
    stats.per_class.emplace(label, cs);
  }
  return stats;
}

std::string stats_csv(const CorpusStats& stats) {
  std::string out =
      "class,documents,tokens_mean,tokens_sd,punct_pct_mean,punct_pct_sd,tokens_per_sentence_mean,"
      "tokens_per_sentence_sd,sentences_mean,sentences_sd,max_sentences\n";
  for (const auto& [label, cs] : stats.per_class) {
    out += csv_field(label) + ',' + std::to_string(cs.documents) + ',' + format_double(cs.token_count.mean) + ',' +
           format_double(cs.token_count.sd) + ',' + format_double(cs.punctuation_fraction.mean) + ',' +
           format_double(cs.punctuation_fraction.sd) + ',' + format_double(cs.tokens_per_sentence.mean) + ',' +
           format_double(cs.tokens_per_sentence.sd) + ',' + format_double(cs.sentences_per_doc.mean) + ',' +
           format_double(cs.sentences_per_doc.sd) + ',' + std::to_string(cs.max_sentences) + '\n';
  }
  return out;
}

RawDocument manifest_entry(const nlohmann::json& j, bool strict, std::size_t line_no) {
  static const std::set<std::string> kKnown = {"id", "term", "class_label", "prompt_id", "text", "conllu_path"};
  auto where = "manifest line " + std::to_string(line_no);
  if (!j.is_object()) throw Error(ErrorCode::BadManifest, where + ": not a JSON object");
  if (strict) {
    for (const auto& [key, _] : j.items()) {
      if (!kKnown.count(key)) throw Error(ErrorCode::BadManifest, where + ": unknown field '" + key + "'");
    }
  }
  auto get_string = [&](const char* key, bool required) -> std::string {
    if (!j.contains(key) || j[key].is_null()) {
      if (required) throw Error(ErrorCode::BadManifest, where + ": missing '" + key + "'");
      return {};
    }
    if (!j[key].is_string()) throw Error(ErrorCode::BadManifest, where + ": '" + key + "' must be a string");
    return j[key].get<std::string>();
  };
  RawDocument doc;
  doc.id = get_string("id", true);
  doc.term = get_string("term", true);
  doc.class_label = get_string("class_label", true);
  doc.text = get_string("text", false);
  doc.conllu_path = get_string("conllu_path", false);
  if (doc.term.empty()) throw Error(ErrorCode::BadManifest, where + ": empty term");
  if (j.contains("prompt_id") && !j["prompt_id"].is_null()) {
    if (!j["prompt_id"].is_number_integer()) {
      throw Error(ErrorCode::BadManifest, where + ": 'prompt_id' must be an integer");
    }
    doc.prompt_id = j["prompt_id"].get<int>();
  }
  if (!j.contains("text") && doc.conllu_path.empty()) {
    throw Error(ErrorCode::BadManifest, where + ": needs 'text' or 'conllu_path'");
  }
  return doc;
}

std::vector<RawDocument> parse_manifest(std::string_view content, bool strict) {
  std::vector<RawDocument> docs;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= content.size()) {
    std::size_t end = content.find('\n', start);
    if (end == std::string_view::npos) end = content.size();
    std::string_view line = content.substr(start, end - start);
    ++line_no;
    start = end + 1;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::BadManifest, "manifest line " + std::to_string(line_no) + ": " + e.what());
    }
    docs.push_back(manifest_entry(j, strict, line_no));
  }
  return docs;
}

nlohmann::json manifest_json(const RawDocument& doc) {
  nlohmann::json j;
  j["id"] = doc.id;
  j["term"] = doc.term;
  j["class_label"] = doc.class_label;
  if (doc.prompt_id) j["prompt_id"] = *doc.prompt_id;
  if (!doc.conllu_path.empty())
    j["conllu_path"] = doc.conllu_path;
  else
    j["text"] = doc.text;
  return j;
}

std::string serialize_manifest(std::span<const RawDocument> docs) {
  std::string out;
  for (const auto& doc : docs) out += manifest_json(doc).dump() + "\n";
  return out;
}

PreprocessResult preprocess(std::span<const RawDocument> docs, const ValidationRules& rules,
                            const CleanOptions& clean) {
  PreprocessResult result;
  std::set<std::string> ids;
  std::set<std::tuple<std::string, std::string, int>> triples;
  for (const auto& raw : docs) {
    if (!ids.insert(raw.id).second) {
      result.rejected.push_back({raw.id, RejectReason::DuplicateId});
      continue;
    }
    if (!triples.insert({raw.term, raw.class_label, raw.prompt_id.value_or(-1)}).second) {
      result.rejected.push_back({raw.id, RejectReason::DuplicateTerm});
      continue;
    }
    RawDocument doc = raw;
    doc.text = clean_text(raw.text, clean);
    const auto sentences = split_sentences(doc.text);
    if (auto reason = validate(doc, sentences.size(), rules, sentences)) {
      result.rejected.push_back({doc.id, *reason});
      continue;
    }
    if (sentences.size() > rules.max_sentences) {
      std::string truncated;
      for (std::size_t i = 0; i < rules.max_sentences; ++i) {
        if (i) truncated += ' ';
        truncated += sentences[i];
      }
      doc.text = std::move(truncated);
    }
    result.accepted.push_back(std::move(doc));
  }
  return result;
}

}  // namespace stylo
