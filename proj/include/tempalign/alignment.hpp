#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "tempalign/embeddings.hpp"
#include "tempalign/svd.hpp"

namespace tempalign {

struct BilingualDictionary {
  std::string source_language;
  std::string target_language;
  std::vector<std::pair<std::string, std::string>> pairs;  // deduplicated
  std::size_t dropped = 0;  // out-of-vocabulary pairs discarded on load

  std::size_t size() const { return pairs.size(); }
};

// Orthogonal map from one language's embedding space into the pivot's,
// acting on column vectors: aligned = matrix * v.
struct AlignmentMatrix {
  Tensor matrix;  // S x S
  std::string source_language;
  std::string target_language;  // the pivot
};

// Identical surface forms present in the top-k vocabularies of both
// languages, paired with themselves. Source index order.
inline BilingualDictionary build_dictionary_string_match(const EmbeddingSpace& src,
                                                         const EmbeddingSpace& tgt, int k = 5000) {
  if (src.vocab.word_count() == 0 || tgt.vocab.word_count() == 0)
    throw ContractError("string-match dictionary: empty vocabulary");
  const Vocabulary src_top = top_k_vocabulary(src, k);
  const Vocabulary tgt_top = top_k_vocabulary(tgt, k);
  BilingualDictionary dict;
  dict.source_language = src.language;
  dict.target_language = tgt.language;
  for (const auto& w : src_top.words())
    if (tgt_top.contains(w)) dict.pairs.emplace_back(w, w);
  if (dict.pairs.empty())
    throw EmptyDictionaryError("string-match dictionary: no shared words between " + src.language +
                               " and " + tgt.language);
  return dict;
}

// Two-column TSV, one pair per line, '#' comments ignored. Pairs with either
// side out of vocabulary are dropped and counted; duplicates kept once.
inline BilingualDictionary load_dictionary(const std::string& path, const EmbeddingSpace& src,
                                           const EmbeddingSpace& tgt) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dictionary: " + path);
  BilingualDictionary dict;
  dict.source_language = src.language;
  dict.target_language = tgt.language;
  std::set<std::pair<std::string, std::string>> seen;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 >= line.size() ||
        line.find('\t', tab + 1) != std::string::npos)
      throw FormatError(path + ":" + std::to_string(line_no) + ": expected two tab-separated columns");
    std::string s = line.substr(0, tab);
    std::string t = line.substr(tab + 1);
    if (!src.vocab.contains(s) || !tgt.vocab.contains(t)) {
      ++dict.dropped;
      continue;
    }
    if (seen.insert({s, t}).second) dict.pairs.emplace_back(std::move(s), std::move(t));
  }
  if (dict.dropped > 0)
    std::cerr << "[tempalign] dictionary " << path << ": " << dict.dropped
              << " out-of-vocabulary pair(s) dropped\n";
  if (dict.pairs.empty()) throw EmptyDictionaryError("dictionary " + path + ": no in-vocabulary pairs");
  return dict;
}

namespace detail {

inline void normalize_row(std::vector<double>& v) {
  double n = 0.0;
  for (double x : v) n += x * x;
  n = std::sqrt(n);
  if (n > 0.0)
    for (double& x : v) x /= n;
}

}  // namespace detail

// Orthogonal Procrustes fit: the orthogonal A minimizing sum_i |A x_i - y_i|^2
// over the dictionary pairs, computed as U V^T from the SVD of sum_i y_i x_i^T.
// Vectors are length-normalized before fitting; the raw vectors are what the
// matrix is later applied to.
inline AlignmentMatrix procrustes_align(const EmbeddingSpace& src, const EmbeddingSpace& tgt,
                                        const BilingualDictionary& dict) {
  if (dict.pairs.empty()) throw EmptyDictionaryError("procrustes: empty dictionary");
  if (src.dim() != tgt.dim())
    throw ConfigError("procrustes: dimensionality differs: " + std::to_string(src.dim()) + " vs " +
                      std::to_string(tgt.dim()));
  const int s = src.dim();
  if (static_cast<int>(dict.pairs.size()) < s)
    std::cerr << "[tempalign] warning: only " << dict.pairs.size() << " dictionary pairs for dimension "
              << s << "; the fit may be under-determined\n";

  Tensor m = Tensor::zeros({s, s});  // sum of y x^T over normalized pairs
  for (const auto& [sw, tw] : dict.pairs) {
    auto x = src.raw_row(src.vocab.lookup(sw));
    auto y = tgt.raw_row(tgt.vocab.lookup(tw));
    detail::normalize_row(x);
    detail::normalize_row(y);
    for (int i = 0; i < s; ++i)
      for (int j = 0; j < s; ++j) m.at(i, j) += y[static_cast<std::size_t>(i)] * x[static_cast<std::size_t>(j)];
  }
  const SvdResult usv = svd(m);
  AlignmentMatrix out;
  out.source_language = dict.source_language;
  out.target_language = dict.target_language;
  out.matrix = Tensor::zeros({s, s});
  // A = U V^T
  for (int i = 0; i < s; ++i)
    for (int j = 0; j < s; ++j) {
      double acc = 0.0;
      for (int k = 0; k < s; ++k) acc += usv.u.at(i, k) * usv.v.at(j, k);
      out.matrix.at(i, j) = acc;
    }
  return out;
}

// Residual |A X - Y|_F over the normalized dictionary pair matrices.
inline double alignment_residual(const AlignmentMatrix& a, const EmbeddingSpace& src,
                                 const EmbeddingSpace& tgt, const BilingualDictionary& dict) {
  const int s = src.dim();
  double sq = 0.0;
  for (const auto& [sw, tw] : dict.pairs) {
    auto x = src.raw_row(src.vocab.lookup(sw));
    auto y = tgt.raw_row(tgt.vocab.lookup(tw));
    detail::normalize_row(x);
    detail::normalize_row(y);
    for (int i = 0; i < s; ++i) {
      double ax = 0.0;
      for (int j = 0; j < s; ++j) ax += a.matrix.at(i, j) * x[static_cast<std::size_t>(j)];
      const double d = ax - y[static_cast<std::size_t>(i)];
      sq += d * d;
    }
  }
  return std::sqrt(sq);
}

inline double max_orthogonality_error(const Tensor& a) {
  const int s = a.rows();
  double worst = 0.0;
  for (int i = 0; i < s; ++i)
    for (int j = 0; j < s; ++j) {
      double dot = 0.0;
      for (int k = 0; k < s; ++k) dot += a.at(k, i) * a.at(k, j);
      worst = std::max(worst, std::abs(dot - (i == j ? 1.0 : 0.0)));
    }
  return worst;
}

// Attaches an alignment to a space; lookups then serve transformed vectors.
// The pivot language itself always keeps the identity, so aligning it is a
// configuration error.
inline void apply_alignment(EmbeddingSpace& space, const AlignmentMatrix& a) {
  if (space.language == a.target_language)
    throw ConfigError("apply_alignment: " + space.language +
                      " is the pivot language and keeps the identity map");
  if (a.source_language != space.language)
    throw ConfigError("apply_alignment: matrix maps " + a.source_language + ", space is " +
                      space.language);
  if (a.matrix.rows() != space.dim() || a.matrix.cols() != space.dim())
    throw ConfigError("apply_alignment: matrix is " + shape_str(a.matrix.shape()) + ", space dim is " +
                      std::to_string(space.dim()));
  space.set_alignment(a.matrix.clone());
}

// Alignment matrices persist in the word-vector text format with the row
// index as the "word"; the language pair travels in two comment lines.
inline void save_alignment(const AlignmentMatrix& a, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write alignment: " + path);
  const int s = a.matrix.rows();
  out << s << " " << s << "\n";
  out << "#src " << a.source_language << "\n";
  out << "#tgt " << a.target_language << "\n";
  char buf[32];
  for (int i = 0; i < s; ++i) {
    out << i;
    for (int j = 0; j < s; ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", a.matrix.at(i, j));
      out << " " << buf;
    }
    out << "\n";
  }
  if (!out) throw IoError("failed writing " + path);
}

inline AlignmentMatrix load_alignment(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open alignment: " + path);
  std::string line;
  long line_no = 0;
  int s = -1;
  AlignmentMatrix a;
  int next_row = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line.rfind("#src ", 0) == 0) {
      a.source_language = line.substr(5);
      continue;
    }
    if (line.rfind("#tgt ", 0) == 0) {
      a.target_language = line.substr(5);
      continue;
    }
    std::istringstream ss(line);
    if (s < 0) {
      long r, c;
      std::string t1, t2;
      ss >> t1 >> t2;
      if (!detail::parse_int(t1, r) || !detail::parse_int(t2, c) || r != c || r <= 0)
        throw FormatError(path + ":" + std::to_string(line_no) + ": expected square header");
      s = static_cast<int>(r);
      a.matrix = Tensor::zeros({s, s});
      continue;
    }
    std::string idx_tok;
    ss >> idx_tok;
    long idx;
    if (!detail::parse_int(idx_tok, idx) || idx != next_row)
      throw FormatError(path + ":" + std::to_string(line_no) + ": expected row " +
                        std::to_string(next_row));
    for (int j = 0; j < s; ++j) {
      std::string tok;
      if (!(ss >> tok)) throw FormatError(path + ":" + std::to_string(line_no) + ": short row");
      double v;
      if (!detail::parse_double(tok, v))
        throw FormatError(path + ":" + std::to_string(line_no) + ": bad float '" + tok + "'");
      a.matrix.at(next_row, j) = v;
    }
    ++next_row;
  }
  if (s < 0 || next_row != s) throw FormatError(path + ": incomplete alignment matrix");
  return a;
}

}  // namespace tempalign
