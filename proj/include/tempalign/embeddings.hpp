#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "tempalign/ops.hpp"
#include "tempalign/tensor.hpp"

namespace tempalign {

constexpr int kPadIndex = 0;
constexpr int kUnkIndex = 1;

// Surface-form inventory with dense indices. Index 0 is PAD, index 1 is UNK;
// real forms start at 2 in file order, which for standard vector files is
// frequency order.
class Vocabulary {
 public:
  Vocabulary() {
    forms_ = {"<pad>", "<unk>"};
    index_["<pad>"] = kPadIndex;
    index_["<unk>"] = kUnkIndex;
  }

  int add(const std::string& form) {
    auto it = index_.find(form);
    if (it != index_.end()) return it->second;
    const int idx = static_cast<int>(forms_.size());
    forms_.push_back(form);
    index_[form] = idx;
    return idx;
  }

  // Total lookup: exact form, then ASCII lowercase, then UNK.
  int lookup(const std::string& form) const {
    auto it = index_.find(form);
    if (it != index_.end()) return it->second;
    std::string lower = form;
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    it = index_.find(lower);
    return it != index_.end() ? it->second : kUnkIndex;
  }

  bool contains(const std::string& form) const { return index_.count(form) > 0; }

  int size() const { return static_cast<int>(forms_.size()); }
  int word_count() const { return size() - 2; }
  const std::string& form(int idx) const { return forms_[static_cast<std::size_t>(idx)]; }

  // Real forms in file order (PAD/UNK excluded).
  std::vector<std::string> words() const {
    return std::vector<std::string>(forms_.begin() + 2, forms_.end());
  }

 private:
  std::vector<std::string> forms_;
  std::unordered_map<std::string, int> index_;
};

// One language's word vectors: vocabulary plus an N x S matrix, optionally
// carrying an orthogonal alignment applied at lookup time.
struct EmbeddingSpace {
  std::string language;
  Vocabulary vocab;
  Tensor vectors;                   // N x S, rows match vocab indices
  std::optional<Tensor> alignment;  // S x S, acts on column vectors
  Tensor alignment_t;               // cached transpose for row-vector use

  int dim() const { return vectors.cols(); }

  void set_alignment(Tensor a) {
    alignment = a;
    alignment_t = transposed(a);
  }

  // Raw stored row, before alignment.
  std::vector<double> raw_row(int idx) const {
    const int s = dim();
    std::vector<double> v(static_cast<std::size_t>(s));
    for (int j = 0; j < s; ++j) v[static_cast<std::size_t>(j)] = vectors.at(idx, j);
    return v;
  }

  // Vector served for a token: alignment * row when an alignment is set.
  std::vector<double> lookup(const std::string& token) const {
    const int idx = vocab.lookup(token);
    auto v = raw_row(idx);
    if (!alignment) return v;
    const int s = dim();
    std::vector<double> out(static_cast<std::size_t>(s), 0.0);
    for (int i = 0; i < s; ++i)
      for (int j = 0; j < s; ++j) out[static_cast<std::size_t>(i)] += alignment->at(i, j) * v[static_cast<std::size_t>(j)];
    return out;
  }

  std::vector<int> index_tokens(const std::vector<std::string>& tokens) const {
    std::vector<int> idx;
    idx.reserve(tokens.size());
    for (const auto& t : tokens) idx.push_back(vocab.lookup(t));
    return idx;
  }

  // Differentiable lookup of a token sequence: n x S matrix of served
  // vectors. Gradients reach the stored matrix when it is trainable.
  Tensor embed(const std::vector<int>& indices) const {
    Tensor x = gather_rows(vectors, indices);
    if (alignment) x = matmul(x, alignment_t);
    return x;
  }
};

namespace detail {

inline bool parse_double(const std::string& tok, double& out) {
  const char* b = tok.data();
  const char* e = b + tok.size();
  auto res = std::from_chars(b, e, out);
  return res.ec == std::errc() && res.ptr == e;
}

inline bool parse_int(const std::string& tok, long& out) {
  const char* b = tok.data();
  const char* e = b + tok.size();
  auto res = std::from_chars(b, e, out);
  return res.ec == std::errc() && res.ptr == e;
}

}  // namespace detail

// Reads the word-vector text format: an optional "<count> <dim>" header,
// then one "<form> <f0> ... <f{S-1}>" line per word. PAD gets the zero
// vector and UNK the mean of all loaded vectors.
inline EmbeddingSpace load_vectors(const std::string& path, const std::string& language,
                                   std::optional<int> max_words = std::nullopt) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open vector file: " + path);

  std::vector<std::string> forms;
  std::vector<std::vector<double>> rows;
  int dim = -1;
  long line_no = 0;
  std::string line;
  bool first_content_line = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string form;
    ss >> form;
    std::vector<double> vals;
    std::string tok;
    while (ss >> tok) {
      double v;
      if (!detail::parse_double(tok, v))
        throw FormatError(path + ":" + std::to_string(line_no) + ": bad float '" + tok + "'");
      vals.push_back(v);
    }
    if (first_content_line) {
      first_content_line = false;
      long a, b;
      if (vals.size() == 1 && detail::parse_int(form, a) && vals[0] == std::floor(vals[0])) {
        // "<count> <dim>" header
        b = static_cast<long>(vals[0]);
        if (a >= 0 && b > 0) {
          dim = static_cast<int>(b);
          continue;
        }
      }
    }
    if (vals.empty())
      throw FormatError(path + ":" + std::to_string(line_no) + ": no vector components");
    if (dim < 0) dim = static_cast<int>(vals.size());
    if (static_cast<int>(vals.size()) != dim)
      throw FormatError(path + ":" + std::to_string(line_no) + ": expected " + std::to_string(dim) +
                        " components, found " + std::to_string(vals.size()));
    forms.push_back(form);
    rows.push_back(std::move(vals));
    if (max_words && static_cast<int>(rows.size()) >= *max_words) break;
  }
  if (rows.empty()) throw FormatError(path + ": no word vectors");

  EmbeddingSpace space;
  space.language = language;
  const int n = static_cast<int>(rows.size());
  space.vectors = Tensor::zeros({n + 2, dim});
  std::vector<double> mean(static_cast<std::size_t>(dim), 0.0);
  for (int i = 0; i < n; ++i) {
    space.vocab.add(forms[static_cast<std::size_t>(i)]);
    for (int j = 0; j < dim; ++j) {
      space.vectors.at(i + 2, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      mean[static_cast<std::size_t>(j)] += rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
  }
  for (int j = 0; j < dim; ++j) space.vectors.at(kUnkIndex, j) = mean[static_cast<std::size_t>(j)] / n;
  return space;
}

// Writes the word-vector text format with a header; PAD/UNK are not written.
inline void save_vectors(const EmbeddingSpace& space, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write vector file: " + path);
  const int n = space.vocab.word_count(), s = space.dim();
  out << n << " " << s << "\n";
  char buf[32];
  for (int i = 0; i < n; ++i) {
    out << space.vocab.form(i + 2);
    for (int j = 0; j < s; ++j) {
      std::snprintf(buf, sizeof(buf), "%.10g", space.vectors.at(i + 2, j));
      out << " " << buf;
    }
    out << "\n";
  }
  if (!out) throw IoError("failed writing " + path);
}

// The k most frequent forms (file order); returns all with a warning when k
// exceeds the vocabulary.
inline Vocabulary top_k_vocabulary(const EmbeddingSpace& space, int k = 5000) {
  if (k < 1) throw ParameterError("top_k_vocabulary: k must be >= 1");
  const int n = space.vocab.word_count();
  if (k > n) {
    std::cerr << "[tempalign] warning: top-k " << k << " exceeds vocabulary of " << n << " ("
              << space.language << "); using all\n";
    k = n;
  }
  Vocabulary out;
  for (int i = 0; i < k; ++i) out.add(space.vocab.form(i + 2));
  return out;
}

// Fraction of tokens that fall back to UNK; diagnostic only.
inline double unk_rate(const EmbeddingSpace& space, const std::vector<std::vector<std::string>>& sentences) {
  std::size_t total = 0, unk = 0;
  for (const auto& sent : sentences)
    for (const auto& tok : sent) {
      ++total;
      if (space.vocab.lookup(tok) == kUnkIndex) ++unk;
    }
  return total == 0 ? 0.0 : static_cast<double>(unk) / static_cast<double>(total);
}

}  // namespace tempalign
