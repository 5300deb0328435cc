#include "stylo/annotation.hpp"

namespace stylo {

namespace {

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      parts.push_back(s.substr(start));
      return parts;
    }
    parts.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

std::optional<int> to_int(std::string_view s) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

bool all_whitespace(std::string_view s) {
  if (s.empty()) return false;
  for (std::size_t pos = 0; pos < s.size();) {
    if (!is_unicode_space(utf8_next(s, pos))) return false;
  }
  return true;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

void check_heads(const Sentence& sentence, std::size_t sentence_index, const std::string& doc_id) {
  const int n = static_cast<int>(sentence.tokens.size());
  int roots = 0;
  for (int i = 0; i < n; ++i) {
    const int head = sentence.tokens[i].head;
    if (head < 0 || head > n || head == i + 1) {
      throw Error(ErrorCode::BadHeadIndex, "document " + doc_id + " sentence " + std::to_string(sentence_index + 1) +
                                               " token " + std::to_string(i + 1) + " head " + std::to_string(head));
    }
    if (head == 0) ++roots;
  }
  if (roots != 1) {
    throw Error(ErrorCode::BadHeadIndex, "document " + doc_id + " sentence " + std::to_string(sentence_index + 1) +
                                             " has " + std::to_string(roots) + " roots");
  }
}

}  // namespace

std::size_t sentence_count(const AnnotatedDocument& doc) { return doc.sentences.size(); }

std::size_t token_count(const AnnotatedDocument& doc, bool include_punct) {
  std::size_t n = 0;
  for (const auto& s : doc.sentences) {
    for (const auto& t : s.tokens) {
      if (include_punct || !t.is_punct()) ++n;
    }
  }
  return n;
}

std::size_t punct_count(const AnnotatedDocument& doc) { return token_count(doc, true) - token_count(doc, false); }

std::vector<AnnotatedDocument> parse_conllu(std::istream& in) {
  std::vector<AnnotatedDocument> docs;
  Sentence current;
  bool in_header = false;  // between `# newdoc` and the first sentence line
  std::size_t line_no = 0;

  auto malformed = [&](const std::string& why) {
    return Error(ErrorCode::MalformedLine, "line " + std::to_string(line_no) + ": " + why);
  };
  auto finish_sentence = [&] {
    if (current.tokens.empty()) {
      if (!current.multiword.empty()) throw malformed("multiword range without tokens");
      return;
    }
    auto& doc = docs.back();
    check_heads(current, doc.sentences.size(), doc.id);
    doc.sentences.push_back(std::move(current));
    current = Sentence{};
  };

  std::string raw;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    if (line.empty()) {
      finish_sentence();
      in_header = false;
      continue;
    }

    if (line.front() == '#') {
      if (!current.tokens.empty()) throw malformed("comment inside a sentence");
      std::string_view body = line.substr(1);
      if (!body.empty() && body.front() == ' ') body.remove_prefix(1);
      const auto eq = body.find('=');
      const std::string key = eq == std::string_view::npos ? trim(body) : trim(body.substr(0, eq));
      const std::string value = eq == std::string_view::npos ? std::string() : trim(body.substr(eq + 1));

      if (key == "newdoc id" || key == "newdoc") {
        if (value.empty()) throw Error(ErrorCode::MissingDocId, "line " + std::to_string(line_no));
        AnnotatedDocument doc;
        doc.id = value;
        docs.push_back(std::move(doc));
        // Comments seen before the newdoc line stay with its first sentence.
        in_header = true;
        continue;
      }
      if (in_header && !docs.empty() && eq != std::string_view::npos) {
        auto& doc = docs.back();
        if (key == "term") {
          doc.term = value;
          continue;
        }
        if (key == "class_label") {
          doc.class_label = value;
          continue;
        }
        if (key == "prompt_id") {
          auto id = to_int(value);
          if (!id) throw malformed("prompt_id is not an integer");
          doc.prompt_id = *id;
          continue;
        }
        if (key == "annotator") {
          doc.metadata.emplace_back(key, value);
          continue;
        }
      }
      in_header = false;
      current.comments.emplace_back(body);
      continue;
    }

    in_header = false;
    const auto cols = split(line, '\t');
    if (cols.size() != 10) {
      throw malformed("expected 10 tab-separated columns, got " + std::to_string(cols.size()));
    }
    if (docs.empty()) {
      throw Error(ErrorCode::MissingDocId, "line " + std::to_string(line_no) + ": token before any '# newdoc id'");
    }
    const std::string_view id = cols[0];
    if (id.find('.') != std::string_view::npos) continue;  // empty node
    if (const auto dash = id.find('-'); dash != std::string_view::npos) {
      auto first = to_int(id.substr(0, dash));
      auto last = to_int(id.substr(dash + 1));
      if (!first || !last || *last < *first) throw malformed("bad multiword range '" + std::string(id) + "'");
      current.multiword.push_back({*first, std::string(line)});
      continue;
    }
    auto index = to_int(id);
    if (!index || *index != static_cast<int>(current.tokens.size()) + 1) {
      throw malformed("token id '" + std::string(id) + "' out of sequence");
    }
    auto head = to_int(cols[6]);
    if (!head) throw malformed("HEAD '" + std::string(cols[6]) + "' is not an integer");

    Token tok;
    tok.surface = cols[1];
    tok.lemma = cols[2];
    tok.upos = cols[3];
    tok.xpos = cols[4];
    if (cols[5] != "_") {
      for (auto item : split(cols[5], '|')) tok.morph.emplace_back(item);
    }
    tok.head = *head;
    tok.deprel = cols[7];
    tok.deps = cols[8];
    if (cols[9] != "_") {
      for (auto item : split(cols[9], '|')) {
        if (item == "SpaceAfter=No")
          tok.space_after = false;
        else if (item == "NE=Yes")
          tok.is_named_entity = true;
        else
          tok.misc.emplace_back(item);
      }
    }
    if (all_whitespace(tok.surface)) tok.upos = kSpaceTag;
    if (tok.upos.empty() || tok.upos == "_") throw malformed("empty UPOS");
    current.tokens.push_back(std::move(tok));
  }
  if (!docs.empty()) finish_sentence();
  return docs;
}

std::vector<AnnotatedDocument> parse_conllu(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_conllu(in);
}

std::string serialize_conllu(const std::vector<AnnotatedDocument>& docs) {
  std::string out;
  auto join = [](const std::vector<std::string>& items) {
    std::string s;
    for (const auto& item : items) {
      if (!s.empty()) s += '|';
      s += item;
    }
    return s.empty() ? std::string("_") : s;
  };
  for (const auto& doc : docs) {
    out += "# newdoc id = " + doc.id + "\n";
    out += "# term = " + doc.term + "\n";
    out += "# class_label = " + doc.class_label + "\n";
    if (doc.prompt_id) out += "# prompt_id = " + std::to_string(*doc.prompt_id) + "\n";
    for (const auto& [key, value] : doc.metadata) out += "# " + key + " = " + value + "\n";
    if (doc.sentences.empty()) out += "\n";
    for (const auto& sentence : doc.sentences) {
      for (const auto& c : sentence.comments) out += "# " + c + "\n";
      std::size_t mw = 0;
      for (std::size_t i = 0; i < sentence.tokens.size(); ++i) {
        while (mw < sentence.multiword.size() && sentence.multiword[mw].first == static_cast<int>(i) + 1) {
          out += sentence.multiword[mw++].line + "\n";
        }
        const Token& t = sentence.tokens[i];
        std::vector<std::string> misc;
        if (t.is_named_entity) misc.emplace_back("NE=Yes");
        if (!t.space_after) misc.emplace_back("SpaceAfter=No");
        misc.insert(misc.end(), t.misc.begin(), t.misc.end());
        out += std::to_string(i + 1) + '\t' + t.surface + '\t' + t.lemma + '\t' + t.upos + '\t' + t.xpos + '\t' +
               join(t.morph) + '\t' + std::to_string(t.head) + '\t' + t.deprel + '\t' + t.deps + '\t' + join(misc) +
               '\n';
      }
      out += "\n";
    }
  }
  return out;
}

DocumentText reconstruct_text(const AnnotatedDocument& doc) {
  DocumentText result;
  std::size_t offset = 0;
  for (const auto& sentence : doc.sentences) {
    auto& spans = result.spans.emplace_back();
    for (const auto& t : sentence.tokens) {
      const std::size_t len = utf8_length(t.surface);
      spans.emplace_back(offset, offset + len);
      result.text += t.surface;
      offset += len;
      if (t.space_after) {
        result.text += ' ';
        ++offset;
      }
    }
  }
  while (!result.text.empty() && result.text.back() == ' ') result.text.pop_back();
  return result;
}

}  // namespace stylo
