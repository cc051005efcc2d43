#pragma once

#include <algorithm>
#include <cstring>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tempalign/alignment.hpp"
#include "tempalign/crf.hpp"
#include "tempalign/embeddings.hpp"
#include "tempalign/lstm.hpp"
#include "tempalign/spans.hpp"

namespace tempalign {

// Dropout state for one training step; absent in evaluation.
struct TrainContext {
  double dropout_rate = 0.0;
  RngStream* rng = nullptr;

  bool active() const { return rng != nullptr && dropout_rate > 0.0; }
};

// Shared non-linear feature extractor: f = tanh(W^T e) with one trainable
// W common to every language, applied on top of the per-language embedding.
class FeatureExtractor {
 public:
  FeatureExtractor() = default;

  FeatureExtractor(int dim, RngStream& rng) : dim_(dim) { w_ = random_orthogonal(dim, rng); w_.set_requires_grad(true); }

  int dim() const { return dim_; }

  Tensor apply(const Tensor& embedded, const TrainContext& ctx) const {
    Tensor x = embedded;
    if (ctx.active()) x = dropout(x, ctx.dropout_rate, *ctx.rng);
    return tanh(matmul(x, w_));
  }

  void collect_params(ParamList& out) const { out.push_back({"fx.w", w_}); }

  Tensor& weight() { return w_; }
  const Tensor& weight() const { return w_; }

 private:
  int dim_ = 0;
  Tensor w_;
};

// Multinomial language classifier D(x) = softmax(T^T relu(V^T f)). Features
// enter through a gradient-reversal node, so optimizing D pushes the
// feature extractor toward language-indistinguishable representations.
class Discriminator {
 public:
  Discriminator() = default;

  Discriminator(int feature_dim, int hidden_dim, int num_languages, RngStream& rng)
      : hidden_dim_(hidden_dim), num_languages_(num_languages) {
    if (num_languages < 2)
      throw ConfigError("discriminator: needs at least 2 languages, got " +
                        std::to_string(num_languages));
    v_ = Tensor::zeros({feature_dim, hidden_dim}, true);
    const double av = 1.0 / std::sqrt(static_cast<double>(feature_dim));
    for (auto& x : v_.data()) x = rng.uniform(-av, av);
    t_ = Tensor::zeros({hidden_dim, num_languages}, true);
    const double at = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
    for (auto& x : t_.data()) x = rng.uniform(-at, at);
  }

  int num_languages() const { return num_languages_; }
  int hidden_dim() const { return hidden_dim_; }

  Tensor logits(const Tensor& features, double lambda) const {
    return matmul(relu(matmul(grad_reverse(features, lambda), v_)), t_);
  }

  // Per-token distribution over languages; rows sum to one.
  Tensor probabilities(const Tensor& features, double lambda) const {
    return softmax(logits(features, lambda), 1);
  }

  // Mean per-token cross-entropy against the true language.
  Tensor loss(const Tensor& features, int language_index, double lambda) const {
    if (language_index < 0 || language_index >= num_languages_)
      throw ConfigError("discriminator: language index " + std::to_string(language_index) +
                        " outside inventory of " + std::to_string(num_languages_));
    Tensor lg = logits(features, lambda);
    const int n = lg.rows();
    Tensor lse = log_sum_exp(lg, 1);  // n
    std::vector<Tensor> picked;
    picked.reserve(static_cast<std::size_t>(n));
    for (int t = 0; t < n; ++t) picked.push_back(pick(lg, t, language_index));
    return sub(mean(lse), mean(concat(picked, 0)));
  }

  void collect_params(ParamList& out) const {
    out.push_back({"disc.v", v_});
    out.push_back({"disc.t", t_});
  }

  Tensor& v() { return v_; }
  Tensor& t() { return t_; }

 private:
  int hidden_dim_ = 0;
  int num_languages_ = 0;
  Tensor v_, t_;
};

struct ModelInit {
  int lstm_hidden = 128;
  int disc_hidden = 100;
  bool trainable_embeddings = false;
  std::uint64_t seed = 0;
};

// The full multilingual tagger: per-language embeddings, shared feature
// extractor, BiLSTM, CRF, and (with two or more languages) the adversarial
// language discriminator.
class TaggerModel {
 public:
  TaggerModel() = default;

  TaggerModel(std::vector<EmbeddingSpace> spaces, const ModelInit& init) : init_(init) {
    if (spaces.empty()) throw ConfigError("model: no embedding spaces");
    std::sort(spaces.begin(), spaces.end(),
              [](const EmbeddingSpace& a, const EmbeddingSpace& b) { return a.language < b.language; });
    dim_ = spaces.front().dim();
    for (auto& s : spaces) {
      if (s.dim() != dim_)
        throw ConfigError("model: embedding dimensionality differs: " + s.language + " has " +
                          std::to_string(s.dim()) + ", expected " + std::to_string(dim_));
      if (spaces_.count(s.language)) throw ConfigError("model: duplicate language " + s.language);
      languages_.push_back(s.language);
      s.vectors.set_requires_grad(init.trainable_embeddings);
      spaces_.emplace(s.language, std::move(s));
    }
    RngStream rng(init.seed, "model-init");
    fx_ = FeatureExtractor(dim_, rng);
    encoder_ = BiLstmEncoder(dim_, init.lstm_hidden, rng);
    crf_ = CrfLayer(encoder_.output_dim());
    if (languages_.size() >= 2)
      disc_ = Discriminator(dim_, init.disc_hidden, static_cast<int>(languages_.size()), rng);
  }

  int dim() const { return dim_; }
  const std::vector<std::string>& languages() const { return languages_; }
  const ModelInit& init_config() const { return init_; }

  int language_index(const std::string& lang) const {
    for (std::size_t i = 0; i < languages_.size(); ++i)
      if (languages_[i] == lang) return static_cast<int>(i);
    throw ConfigError("unknown language: " + lang);
  }

  const EmbeddingSpace& space(const std::string& lang) const {
    auto it = spaces_.find(lang);
    if (it == spaces_.end()) throw ConfigError("unknown language: " + lang);
    return it->second;
  }
  EmbeddingSpace& space(const std::string& lang) {
    auto it = spaces_.find(lang);
    if (it == spaces_.end()) throw ConfigError("unknown language: " + lang);
    return it->second;
  }

  // F(x) per token: n x S.
  Tensor feature_extract(const std::vector<std::string>& tokens, const std::string& lang,
                         const TrainContext& ctx = {}) const {
    if (tokens.empty()) throw ContractError("feature_extract: empty sentence");
    const auto& sp = space(lang);
    return fx_.apply(sp.embed(sp.index_tokens(tokens)), ctx);
  }

  Tensor encode(const Tensor& features) const { return encoder_.encode(features); }

  Tensor emissions_for(const std::vector<std::string>& tokens, const std::string& lang,
                       const TrainContext& ctx = {}) const {
    return crf_.emissions(encoder_.encode(feature_extract(tokens, lang, ctx)));
  }

  // CRF negative log-likelihood of one sentence.
  Tensor sentence_loss(const std::vector<std::string>& tokens, const std::vector<int>& gold,
                       const std::string& lang, const TrainContext& ctx = {},
                       const std::string& context_name = "") const {
    return crf_.log_likelihood_loss(emissions_for(tokens, lang, ctx), gold, context_name);
  }

  struct Tagging {
    std::vector<int> labels;
    std::vector<TimexSpan> spans;
    double score = 0.0;
  };

  // Viterbi tagging followed by span decoding (with IOB2 repair).
  Tagging tag(const std::vector<std::string>& tokens, const std::string& lang) const {
    auto decoded = crf_.viterbi(emissions_for(tokens, lang));
    return {decoded.labels, iob2_to_spans(decoded.labels), decoded.score};
  }

  bool has_discriminator() const { return disc_.num_languages() >= 2; }
  const Discriminator& discriminator() const { return disc_; }
  Discriminator& discriminator() { return disc_; }

  FeatureExtractor& feature_extractor() { return fx_; }
  BiLstmEncoder& encoder() { return encoder_; }
  CrfLayer& crf() { return crf_; }

  // Parameter sets of the update rule: F is shared, C is the tagger head,
  // D the discriminator.
  ParamList params_theta_f() const {
    ParamList out;
    fx_.collect_params(out);
    if (init_.trainable_embeddings)
      for (const auto& lang : languages_) out.push_back({"emb." + lang, spaces_.at(lang).vectors});
    return out;
  }
  ParamList params_theta_c() const {
    ParamList out;
    encoder_.collect_params(out);
    crf_.collect_params(out);
    return out;
  }
  ParamList params_theta_d() const {
    ParamList out;
    if (has_discriminator()) disc_.collect_params(out);
    return out;
  }
  ParamList all_params() const {
    ParamList out = params_theta_f();
    for (auto& p : params_theta_c()) out.push_back(p);
    for (auto& p : params_theta_d()) out.push_back(p);
    return out;
  }

  void zero_all_grads() const {
    auto ps = all_params();
    zero_grads(ps);
  }

  void save(const std::string& path) const;
  static TaggerModel load(const std::string& path);

 private:
  ModelInit init_;
  int dim_ = 0;
  std::vector<std::string> languages_;  // sorted; index = discriminator class
  std::map<std::string, EmbeddingSpace> spaces_;
  FeatureExtractor fx_;
  BiLstmEncoder encoder_;
  CrfLayer crf_;
  Discriminator disc_;
};

// ---------------------------------------------------------------------------
// Checkpoint format: versioned binary, all tensors as little-endian f64 in
// declaration order, plus a sidecar text manifest of tensor names/shapes.

namespace detail {

class BinWriter {
 public:
  explicit BinWriter(const std::string& path) : out_(path, std::ios::binary) {
    if (!out_) throw IoError("cannot write checkpoint: " + path);
  }
  void u8(std::uint8_t v) { out_.put(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.put(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    for (int i = 0; i < 8; ++i) out_.put(static_cast<char>((bits >> (8 * i)) & 0xff));
  }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  void check(const std::string& path) {
    if (!out_) throw IoError("failed writing checkpoint: " + path);
  }

 private:
  std::ofstream out_;
};

class BinReader {
 public:
  explicit BinReader(const std::string& path) : in_(path, std::ios::binary), path_(path) {
    if (!in_) throw IoError("cannot open checkpoint: " + path);
  }
  std::uint8_t u8() {
    int c = in_.get();
    if (c == EOF) fail();
    return static_cast<std::uint8_t>(c);
  }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(u8()) << (8 * i);
    return v;
  }
  double f64() {
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(u8()) << (8 * i);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  std::string str() {
    const std::uint32_t n = u32();
    std::string s(n, '\0');
    in_.read(s.data(), n);
    if (!in_) fail();
    return s;
  }
  [[noreturn]] void fail() { throw FormatError("truncated or corrupt checkpoint: " + path_); }

 private:
  std::ifstream in_;
  std::string path_;
};

inline void write_tensor(BinWriter& w, const std::string& name, const Tensor& t) {
  w.str(name);
  w.u32(static_cast<std::uint32_t>(t.rank()));
  for (int d : t.shape()) w.u32(static_cast<std::uint32_t>(d));
  for (double v : t.data()) w.f64(v);
}

}  // namespace detail

constexpr std::uint32_t kCheckpointVersion = 1;

inline void TaggerModel::save(const std::string& path) const {
  detail::BinWriter w(path);
  w.str("TALNCKPT");
  w.u32(kCheckpointVersion);
  // Label scheme.
  w.u32(LabelScheme::kNumLabels);
  for (const auto& l : LabelScheme::all_names()) w.str(l);
  // Dimensions and flags.
  w.u32(static_cast<std::uint32_t>(dim_));
  w.u32(static_cast<std::uint32_t>(init_.lstm_hidden));
  w.u32(static_cast<std::uint32_t>(init_.disc_hidden));
  w.u32(static_cast<std::uint32_t>(languages_.size()));
  w.u8(init_.trainable_embeddings ? 1 : 0);
  // Language inventory with vocabularies and alignments.
  for (const auto& lang : languages_) {
    const auto& sp = spaces_.at(lang);
    w.str(lang);
    const auto words = sp.vocab.words();
    w.u32(static_cast<std::uint32_t>(words.size()));
    for (const auto& word : words) w.str(word);
    w.u8(sp.alignment ? 1 : 0);
    if (sp.alignment)
      for (double v : sp.alignment->data()) w.f64(v);
  }
  // Parameter tensors in declaration order.
  ParamList params = all_params();
  for (const auto& lang : languages_)
    if (!init_.trainable_embeddings) params.push_back({"emb." + lang, spaces_.at(lang).vectors});
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) detail::write_tensor(w, p.name, p.value);
  w.check(path);

  std::ofstream manifest(path + ".manifest");
  if (!manifest) throw IoError("cannot write manifest: " + path + ".manifest");
  for (const auto& p : params) manifest << p.name << "\t" << shape_str(p.value.shape()) << "\n";
}

inline TaggerModel TaggerModel::load(const std::string& path) {
  detail::BinReader r(path);
  if (r.str() != "TALNCKPT") throw FormatError(path + ": not a checkpoint file");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    throw FormatError(path + ": unsupported checkpoint version " + std::to_string(version));
  const std::uint32_t n_labels = r.u32();
  if (n_labels != LabelScheme::kNumLabels) throw DataError(path + ": label scheme size mismatch");
  for (int i = 0; i < static_cast<int>(n_labels); ++i)
    if (r.str() != LabelScheme::name(i)) throw DataError(path + ": label scheme mismatch");

  const int dim = static_cast<int>(r.u32());
  ModelInit init;
  init.lstm_hidden = static_cast<int>(r.u32());
  init.disc_hidden = static_cast<int>(r.u32());
  const std::uint32_t n_langs = r.u32();
  init.trainable_embeddings = r.u8() != 0;

  std::vector<EmbeddingSpace> spaces;
  std::vector<std::optional<Tensor>> alignments;
  for (std::uint32_t i = 0; i < n_langs; ++i) {
    EmbeddingSpace sp;
    sp.language = r.str();
    const std::uint32_t n_words = r.u32();
    for (std::uint32_t k = 0; k < n_words; ++k) sp.vocab.add(r.str());
    sp.vectors = Tensor::zeros({static_cast<int>(n_words) + 2, dim});
    if (r.u8()) {
      Tensor a = Tensor::zeros({dim, dim});
      for (auto& v : a.data()) v = r.f64();
      alignments.emplace_back(a);
    } else {
      alignments.emplace_back(std::nullopt);
    }
    spaces.push_back(std::move(sp));
  }

  TaggerModel model(std::move(spaces), init);
  // Overwrite freshly initialized parameters with the stored tensors.
  std::map<std::string, Tensor> by_name;
  for (auto& p : model.all_params()) by_name.emplace(p.name, p.value);
  for (std::size_t i = 0; i < model.languages_.size(); ++i) {
    auto& sp = model.spaces_.at(model.languages_[i]);
    by_name.emplace("emb." + sp.language, sp.vectors);
    if (alignments[i]) sp.set_alignment(alignments[i]->clone());
  }
  const std::uint32_t n_tensors = r.u32();
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    const std::string name = r.str();
    const std::uint32_t rank = r.u32();
    Shape shape;
    for (std::uint32_t d = 0; d < rank; ++d) shape.push_back(static_cast<int>(r.u32()));
    auto it = by_name.find(name);
    if (it == by_name.end()) throw FormatError(path + ": unexpected tensor '" + name + "'");
    if (it->second.shape() != shape)
      throw FormatError(path + ": tensor '" + name + "' has shape " + shape_str(shape) +
                        ", expected " + shape_str(it->second.shape()));
    for (auto& v : it->second.data()) v = r.f64();
  }
  return model;
}

// Writes post-extractor features for every token, one TSV row per token,
// for external projection and visualization.
inline void export_embeddings(const TaggerModel& model,
                              const std::vector<std::pair<std::string, std::vector<std::string>>>& sentences,
                              const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write feature export: " + path);
  const int s = model.dim();
  out << "lang\ttoken";
  for (int j = 0; j < s; ++j) out << "\tf" << j;
  out << "\n";
  char buf[32];
  for (const auto& [lang, tokens] : sentences) {
    if (tokens.empty()) continue;
    Tensor f = model.feature_extract(tokens, lang);
    for (std::size_t t = 0; t < tokens.size(); ++t) {
      out << lang << "\t" << tokens[t];
      for (int j = 0; j < s; ++j) {
        std::snprintf(buf, sizeof(buf), "%.10g", f.at(static_cast<int>(t), j));
        out << "\t" << buf;
      }
      out << "\n";
    }
  }
  if (!out) throw IoError("failed writing " + path);
}

}  // namespace tempalign
