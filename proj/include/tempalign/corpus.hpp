#pragma once

#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "tempalign/labels.hpp"
#include "tempalign/spans.hpp"

namespace tempalign {

struct AnnotatedSentence {
  std::string language;
  std::vector<std::string> tokens;
  std::optional<std::vector<int>> labels;  // label indices, same length as tokens
  std::string doc_id;

  std::vector<TimexSpan> gold_spans() const {
    return labels ? iob2_to_spans(*labels) : std::vector<TimexSpan>{};
  }
};

struct Corpus {
  std::string language;
  std::string split;  // train, dev or test; informational
  std::vector<AnnotatedSentence> sentences;

  std::size_t size() const { return sentences.size(); }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

// Reads the labeled column format: a required "# lang: <iso>" first line,
// optional "# doc: <id>" grouping directives, then one "<token>\t<label>"
// line per token with blank lines separating sentences. A file whose first
// token line has no label column is loaded unlabeled (labels absent), which
// is the input shape used for plain tagging.
inline Corpus load_labeled(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus: " + path);

  Corpus corpus;
  std::string line;
  long line_no = 0;
  bool saw_lang = false;
  int columns = 0;  // 1 or 2, fixed by the first token line
  std::string current_doc;
  int auto_doc = 0;
  int in_current_doc = 0;
  std::set<std::string> finished_docs;
  std::vector<std::string> tokens;
  std::vector<int> labels;
  long sentence_start_line = 0;

  auto flush_sentence = [&]() {
    if (tokens.empty()) return;
    AnnotatedSentence s;
    s.language = corpus.language;
    s.tokens = std::move(tokens);
    if (columns == 2) {
      if (!LabelScheme::valid_sequence(labels)) {
        // Documented repair: decode with the I-as-B rule and re-encode.
        auto repaired = spans_to_iob2(iob2_to_spans(labels), static_cast<int>(labels.size()));
        std::cerr << "[tempalign] " << path << ":" << sentence_start_line
                  << ": invalid IOB2 sequence repaired\n";
        labels = std::move(repaired);
      }
      s.labels = std::move(labels);
    }
    s.doc_id = current_doc.empty() ? "s" + std::to_string(auto_doc++) : current_doc;
    ++in_current_doc;
    corpus.sentences.push_back(std::move(s));
    tokens = {};
    labels = {};
  };

  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = detail::trim(line);
    if (!saw_lang) {
      if (t.rfind("# lang:", 0) != 0)
        throw FormatError(path + ":1: first line must be '# lang: <iso>'");
      corpus.language = detail::trim(t.substr(7));
      if (corpus.language.empty()) throw FormatError(path + ":1: empty language code");
      saw_lang = true;
      continue;
    }
    if (t.empty()) {
      flush_sentence();
      continue;
    }
    if (t[0] == '#') {
      if (t.rfind("# doc:", 0) == 0) {
        flush_sentence();
        if (!current_doc.empty() && in_current_doc > 0) finished_docs.insert(current_doc);
        std::string id = detail::trim(t.substr(6));
        if (id.empty()) throw FormatError(path + ":" + std::to_string(line_no) + ": empty doc id");
        if (finished_docs.count(id))
          throw DataError(path + ":" + std::to_string(line_no) + ": duplicate doc id '" + id + "'");
        current_doc = id;
        in_current_doc = 0;
      }
      continue;  // other comments ignored
    }
    // Token line.
    const auto tab = line.find('\t');
    const int ncols = tab == std::string::npos ? 1 : 2;
    if (ncols == 2 && line.find('\t', tab + 1) != std::string::npos)
      throw FormatError(path + ":" + std::to_string(line_no) + ": expected at most 2 columns");
    if (columns == 0) columns = ncols;
    if (ncols != columns)
      throw FormatError(path + ":" + std::to_string(line_no) + ": expected " +
                        std::to_string(columns) + " column(s), found " + std::to_string(ncols));
    if (tokens.empty()) sentence_start_line = line_no;
    std::string token = detail::trim(ncols == 2 ? line.substr(0, tab) : line);
    if (token.empty()) throw FormatError(path + ":" + std::to_string(line_no) + ": empty token");
    tokens.push_back(std::move(token));
    if (ncols == 2) {
      const std::string label = detail::trim(line.substr(tab + 1));
      try {
        labels.push_back(LabelScheme::index(label));
      } catch (const DataError&) {
        throw DataError(path + ":" + std::to_string(line_no) + ": unknown label '" + label + "'");
      }
    }
  }
  flush_sentence();
  if (!saw_lang) throw FormatError(path + ": empty corpus file");
  return corpus;
}

// One whitespace-pre-tokenized sentence per line; blank lines are skipped.
inline std::vector<std::vector<std::string>> load_unlabeled(const std::string& path,
                                                            const std::string& language) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open unlabeled corpus: " + path);
  std::vector<std::vector<std::string>> sentences;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::vector<std::string> tokens;
    std::string tok;
    while (ss >> tok) tokens.push_back(tok);
    if (!tokens.empty()) sentences.push_back(std::move(tokens));
  }
  if (sentences.empty())
    std::cerr << "[tempalign] warning: unlabeled corpus " << path << " (" << language
              << ") is empty\n";
  return sentences;
}

// Serializes a corpus back to the column format (whitespace-normalized).
inline void save_labeled(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write corpus: " + path);
  out << "# lang: " << corpus.language << "\n";
  std::string last_doc;
  for (const auto& s : corpus.sentences) {
    if (s.doc_id != last_doc && s.doc_id.rfind("s", 0) != 0) out << "# doc: " << s.doc_id << "\n";
    last_doc = s.doc_id;
    for (std::size_t t = 0; t < s.tokens.size(); ++t) {
      out << s.tokens[t];
      if (s.labels) out << "\t" << LabelScheme::name((*s.labels)[t]);
      out << "\n";
    }
    out << "\n";
  }
  if (!out) throw IoError("failed writing " + path);
}

// Gold spans grouped by document, with sentence-local token indices shifted
// by the cumulative token offset of earlier sentences in the same document.
inline std::map<std::string, std::vector<TimexSpan>> document_spans(const Corpus& corpus) {
  std::map<std::string, std::vector<TimexSpan>> docs;
  std::map<std::string, int> offsets;
  for (const auto& s : corpus.sentences) {
    auto& off = offsets[s.doc_id];
    auto& spans = docs[s.doc_id];
    for (auto sp : s.gold_spans()) {
      sp.start += off;
      sp.end += off;
      spans.push_back(sp);
    }
    off += static_cast<int>(s.tokens.size());
  }
  return docs;
}

}  // namespace tempalign
