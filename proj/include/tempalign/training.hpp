#pragma once

#include <cmath>
#include <iostream>
#include <limits>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "tempalign/config.hpp"
#include "tempalign/model.hpp"
#include "tempalign/parallel.hpp"
#include "tempalign/scoring.hpp"

namespace tempalign {

// ---------------------------------------------------------------------------
// Batch planning

struct BatchRef {
  std::string language;
  std::vector<int> sentence_ids;
};

// Labeled batches for one epoch: every sentence exactly once, monolingual
// batches, languages interleaved proportionally to their batch counts. The
// plan is a pure function of (seed, epoch).
inline std::vector<BatchRef> make_batch_plan(const std::map<std::string, Corpus>& train,
                                             int batch_size, std::uint64_t seed, int epoch) {
  struct Queue {
    std::string language;
    std::vector<BatchRef> batches;
    std::size_t next = 0;
    double credit = 0.0;
  };
  std::vector<Queue> queues;
  std::size_t total = 0;
  for (const auto& [lang, corpus] : train) {
    if (corpus.sentences.empty()) continue;
    std::vector<int> ids(corpus.sentences.size());
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<int>(i);
    RngStream rng(seed, "batch-shuffle", {static_cast<std::uint64_t>(epoch), detail::fnv1a(lang)});
    rng.shuffle(ids);
    Queue q;
    q.language = lang;
    for (std::size_t i = 0; i < ids.size(); i += static_cast<std::size_t>(batch_size)) {
      BatchRef b;
      b.language = lang;
      for (std::size_t j = i; j < std::min(ids.size(), i + static_cast<std::size_t>(batch_size)); ++j)
        b.sentence_ids.push_back(ids[j]);
      q.batches.push_back(std::move(b));
    }
    total += q.batches.size();
    queues.push_back(std::move(q));
  }
  // Largest-remainder interleave: each slot goes to the queue with the most
  // accumulated credit; shares are proportional to batch counts.
  std::vector<BatchRef> plan;
  plan.reserve(total);
  for (std::size_t slot = 0; slot < total; ++slot) {
    Queue* pick = nullptr;
    for (auto& q : queues) {
      if (q.next >= q.batches.size()) continue;
      q.credit += static_cast<double>(q.batches.size()) / static_cast<double>(total);
      if (!pick || q.credit > pick->credit) pick = &q;
    }
    plan.push_back(std::move(pick->batches[pick->next]));
    pick->next += 1;
    pick->credit -= 1.0;
  }
  return plan;
}

// ---------------------------------------------------------------------------
// Early stopping

// Tracks the best development metric; stops once the metric has not
// improved for `patience` consecutive epochs.
class EarlyStopper {
 public:
  explicit EarlyStopper(int patience) : patience_(patience) {}

  bool update(double metric, int epoch) {
    if (metric > best_) {
      best_ = metric;
      best_epoch_ = epoch;
      since_ = 0;
      return true;
    }
    ++since_;
    return false;
  }

  bool should_stop() const { return since_ >= patience_; }
  double best() const { return best_; }
  int best_epoch() const { return best_epoch_; }

 private:
  int patience_;
  double best_ = -std::numeric_limits<double>::infinity();
  int best_epoch_ = 0;
  int since_ = 0;
};

// ---------------------------------------------------------------------------
// Training

struct TrainData {
  std::map<std::string, Corpus> train;
  std::map<std::string, Corpus> dev;
  std::map<std::string, std::vector<std::vector<std::string>>> unlabeled;
};

struct EpochRecord {
  int epoch = 0;
  double loss_c = 0.0;
  double loss_d = 0.0;
  double disc_acc = 0.0;
  std::map<std::string, ScoreReport> dev;
  ScoreReport combined;
};

struct TrainResult {
  std::vector<EpochRecord> log;
  int best_epoch = 0;
  double best_dev_relaxed_f1 = 0.0;
};

// Predicted spans for every document of a corpus, with sentence-local spans
// shifted onto document token offsets. Sentences are tagged independently
// (parallelizable); assembly follows corpus order.
inline DocumentSpans predict_document_spans(const TaggerModel& model, const Corpus& corpus,
                                            int threads = 1) {
  std::vector<std::vector<TimexSpan>> per_sentence(corpus.sentences.size());
  parallel_for(corpus.sentences.size(), threads, [&](std::size_t i) {
    per_sentence[i] = model.tag(corpus.sentences[i].tokens, corpus.language).spans;
  });
  DocumentSpans docs;
  std::map<std::string, int> offsets;
  for (std::size_t i = 0; i < corpus.sentences.size(); ++i) {
    const auto& s = corpus.sentences[i];
    auto& off = offsets[s.doc_id];
    auto& spans = docs[s.doc_id];
    for (auto sp : per_sentence[i]) {
      sp.start += off;
      sp.end += off;
      spans.push_back(sp);
    }
    off += static_cast<int>(s.tokens.size());
  }
  return docs;
}

struct DevEvaluation {
  std::map<std::string, ScoreReport> per_language;
  ScoreReport combined;  // micro-average over all dev documents
};

inline DevEvaluation evaluate_dev(const TaggerModel& model,
                                  const std::map<std::string, Corpus>& dev, int threads = 1) {
  DevEvaluation out;
  detail::MatchCounts total;
  for (const auto& [lang, corpus] : dev) {
    const DocumentSpans gold = document_spans(corpus);
    const DocumentSpans pred = predict_document_spans(model, corpus, threads);
    out.per_language[lang] = score(gold, pred);
    auto git = gold.begin();
    auto pit = pred.begin();
    for (; git != gold.end(); ++git, ++pit) {
      const auto c = detail::match_document(git->second, pit->second);
      total.gold += c.gold;
      total.pred += c.pred;
      total.strict += c.strict;
      total.relaxed += c.relaxed;
      total.type += c.type;
    }
  }
  out.combined = score_counts(total);
  return out;
}

// Alternating multi-task trainer. Tagger batches update the tagger and the
// shared feature extractor by descent on the CRF loss; every
// `disc_interval`-th batch (when lambda > 0 and at least two languages are
// present) a mixed-language discriminator batch updates the discriminator by
// descent while the feature extractor receives the reversed, lambda-scaled
// gradient through the reversal node.
class Trainer {
 public:
  Trainer(TrainConfig cfg, TrainData data, std::vector<EmbeddingSpace> spaces)
      : cfg_(std::move(cfg)),
        data_(std::move(data)),
        model_(std::move(spaces), ModelInit{cfg_.lstm_hidden, cfg_.disc_hidden,
                                            cfg_.trainable_embeddings, cfg_.seed}),
        adamw_(AdamWConfig{cfg_.lr, 0.9, 0.999, 1e-8, cfg_.weight_decay}),
        sgd_(cfg_.lr),
        disc_sample_rng_(cfg_.seed, "disc-sample") {
    if (data_.train.empty()) throw ConfigError("training: no labeled data");
    for (const auto& [lang, corpus] : data_.train) {
      if (corpus.sentences.empty()) throw ConfigError("training: empty corpus for " + lang);
      model_.language_index(lang);  // throws on unknown language
    }
    for (const auto& [lang, pool] : data_.unlabeled) model_.language_index(lang);
    disc_languages_ = model_.languages();
  }

  TaggerModel& model() { return model_; }
  const TaggerModel& model() const { return model_; }
  const TrainConfig& config() const { return cfg_; }

  struct Counters {
    std::uint64_t tagger_steps = 0;
    std::uint64_t disc_steps = 0;
  };
  const Counters& counters() const { return counters_; }

  bool adversarial_enabled() const {
    return cfg_.lambda > 0.0 && model_.has_discriminator();
  }

  // One tagger step on a monolingual batch: mean sentence NLL, backward,
  // optional clip, optimizer step over theta_C and theta_F.
  double tagger_step(const std::string& language,
                     const std::vector<const AnnotatedSentence*>& batch) {
    if (batch.empty()) throw ContractError("tagger_step: empty batch");
    RngStream dropout_rng(cfg_.seed, "dropout", {static_cast<std::uint64_t>(epoch_),
                                                 static_cast<std::uint64_t>(global_batch_)});
    TrainContext ctx{cfg_.dropout, &dropout_rng};
    model_.zero_all_grads();
    double loss_value;
    {
      Tape tape;
      Tensor total = Tensor::scalar(0.0);
      for (const auto* s : batch) {
        if (!s->labels) throw DataError("tagger_step: unlabeled sentence in labeled batch");
        total = add(total, model_.sentence_loss(s->tokens, *s->labels, language, ctx, s->doc_id));
      }
      Tensor loss = scale(total, 1.0 / static_cast<double>(batch.size()));
      loss_value = loss.value();
      check_finite(loss_value, "tagger loss");
      tape.backward(loss);
    }
    ParamList group = model_.params_theta_c();
    for (auto& p : model_.params_theta_f()) group.push_back(p);
    if (cfg_.grad_clip > 0.0) clip_grad_norm(group, cfg_.grad_clip);
    apply_step(group);
    ++counters_.tagger_steps;
    return loss_value;
  }

  struct DiscSentence {
    int language_index;
    const std::vector<std::string>* tokens;
    std::string language;
  };

  // One discriminator step on a mixed-language batch. Returns (loss, token
  // accuracy). theta_D descends on L_D; theta_F receives only the reversed
  // gradient; theta_C is untouched.
  std::pair<double, double> discriminator_step(const std::vector<DiscSentence>& batch,
                                               double lambda) {
    if (batch.empty()) throw ContractError("discriminator_step: empty batch");
    if (!model_.has_discriminator())
      throw ConfigError("discriminator_step: model has fewer than 2 languages");
    RngStream dropout_rng(cfg_.seed, "dropout-disc", {static_cast<std::uint64_t>(epoch_),
                                                      static_cast<std::uint64_t>(global_batch_)});
    TrainContext ctx{cfg_.dropout, &dropout_rng};
    model_.zero_all_grads();
    double loss_value;
    std::size_t correct = 0, total_tokens = 0;
    {
      Tape tape;
      Tensor total = Tensor::scalar(0.0);
      for (const auto& s : batch) {
        Tensor features = model_.feature_extract(*s.tokens, s.language, ctx);
        total = add(total, model_.discriminator().loss(features, s.language_index, lambda));
        // Accuracy bookkeeping on the same forward features.
        Tensor probs = softmax(model_.discriminator().logits(features, 0.0), 1);
        for (int t = 0; t < probs.rows(); ++t) {
          int arg = 0;
          for (int o = 1; o < probs.cols(); ++o)
            if (probs.at(t, o) > probs.at(t, arg)) arg = o;
          if (arg == s.language_index) ++correct;
          ++total_tokens;
        }
      }
      Tensor loss = scale(total, 1.0 / static_cast<double>(batch.size()));
      loss_value = loss.value();
      check_finite(loss_value, "discriminator loss");
      tape.backward(loss);
    }
    ParamList group = model_.params_theta_d();
    for (auto& p : model_.params_theta_f()) group.push_back(p);
    if (cfg_.grad_clip > 0.0) clip_grad_norm(group, cfg_.grad_clip);
    apply_step(group);
    ++counters_.disc_steps;
    return {loss_value, total_tokens ? static_cast<double>(correct) / static_cast<double>(total_tokens) : 0.0};
  }

  // Mixed-language discriminator batch: language uniform, sentence uniform
  // from that language's unlabeled pool when present, labeled data otherwise.
  std::vector<DiscSentence> sample_disc_batch() {
    std::vector<DiscSentence> batch;
    for (int i = 0; i < cfg_.batch_size; ++i) {
      const auto& lang =
          disc_languages_[static_cast<std::size_t>(disc_sample_rng_.below(disc_languages_.size()))];
      const std::vector<std::string>* tokens = nullptr;
      auto uit = data_.unlabeled.find(lang);
      if (uit != data_.unlabeled.end() && !uit->second.empty()) {
        tokens = &uit->second[static_cast<std::size_t>(disc_sample_rng_.below(uit->second.size()))];
      } else {
        const auto& corpus = data_.train.at(lang);
        tokens =
            &corpus.sentences[static_cast<std::size_t>(disc_sample_rng_.below(corpus.size()))].tokens;
      }
      batch.push_back({model_.language_index(lang), tokens, lang});
    }
    return batch;
  }

  TrainResult train() {
    report_unk_rates();
    TrainResult result;
    EarlyStopper stopper(cfg_.patience);
    std::vector<std::vector<double>> best_snapshot;
    const int threads = eval_threads();
    const bool adversarial = adversarial_enabled();

    for (epoch_ = 1; epoch_ <= cfg_.epochs; ++epoch_) {
      const auto plan = make_batch_plan(data_.train, cfg_.batch_size, cfg_.seed, epoch_);
      double sum_c = 0.0, sum_d = 0.0, sum_acc = 0.0;
      int n_c = 0, n_d = 0;
      for (std::size_t b = 0; b < plan.size(); ++b) {
        ++global_batch_;
        const auto& ref = plan[b];
        std::vector<const AnnotatedSentence*> batch;
        for (int id : ref.sentence_ids)
          batch.push_back(&data_.train.at(ref.language).sentences[static_cast<std::size_t>(id)]);
        try {
          sum_c += tagger_step(ref.language, batch);
        } catch (const NumericError& e) {
          throw NumericError(std::string(e.what()) + " (epoch " + std::to_string(epoch_) +
                             ", batch " + std::to_string(b + 1) + ")");
        }
        ++n_c;
        if (adversarial && (b + 1) % static_cast<std::size_t>(cfg_.disc_interval) == 0) {
          try {
            auto [dl, acc] = discriminator_step(sample_disc_batch(), cfg_.lambda);
            sum_d += dl;
            sum_acc += acc;
            ++n_d;
          } catch (const NumericError& e) {
            throw NumericError(std::string(e.what()) + " (epoch " + std::to_string(epoch_) +
                               ", batch " + std::to_string(b + 1) + ")");
          }
        }
      }

      EpochRecord rec;
      rec.epoch = epoch_;
      rec.loss_c = n_c ? sum_c / n_c : 0.0;
      rec.loss_d = n_d ? sum_d / n_d : 0.0;
      rec.disc_acc = n_d ? sum_acc / n_d : 0.0;
      if (!data_.dev.empty()) {
        auto dev_eval = evaluate_dev(model_, data_.dev, threads);
        rec.dev = std::move(dev_eval.per_language);
        rec.combined = dev_eval.combined;
      }
      result.log.push_back(rec);

      if (!data_.dev.empty()) {
        if (stopper.update(rec.combined.relaxed.f1, epoch_)) best_snapshot = snapshot_params();
        if (stopper.should_stop()) break;
      }
    }

    if (!best_snapshot.empty()) {
      restore_params(best_snapshot);
      result.best_epoch = stopper.best_epoch();
      result.best_dev_relaxed_f1 = stopper.best();
    } else {
      result.best_epoch = result.log.empty() ? 0 : result.log.back().epoch;
      result.best_dev_relaxed_f1 = 0.0;
    }
    return result;
  }

 private:
  void apply_step(ParamList& group) {
    if (cfg_.optimizer == "sgd") sgd_.step(group);
    else adamw_.step(group);
  }

  static void check_finite(double v, const char* what) {
    if (!std::isfinite(v)) throw NumericError(std::string(what) + " is not finite");
  }

  std::vector<std::vector<double>> snapshot_params() const {
    std::vector<std::vector<double>> out;
    for (const auto& p : model_.all_params()) out.push_back(p.value.data());
    return out;
  }

  void restore_params(const std::vector<std::vector<double>>& snap) {
    auto params = model_.all_params();
    for (std::size_t i = 0; i < params.size(); ++i) params[i].value.data() = snap[i];
  }

  void report_unk_rates() const {
    for (const auto& [lang, corpus] : data_.dev) {
      std::vector<std::vector<std::string>> sents;
      for (const auto& s : corpus.sentences) sents.push_back(s.tokens);
      const double rate = unk_rate(model_.space(lang), sents);
      if (rate > 0.0)
        std::cerr << "[tempalign] dev UNK rate for " << lang << ": " << rate << "\n";
    }
  }

  TrainConfig cfg_;
  TrainData data_;
  TaggerModel model_;
  AdamW adamw_;
  Sgd sgd_;
  RngStream disc_sample_rng_;
  std::vector<std::string> disc_languages_;
  Counters counters_;
  int epoch_ = 1;
  std::uint64_t global_batch_ = 0;
};

// ---------------------------------------------------------------------------
// Data loading from a validated config

inline TrainData load_train_data(const TrainConfig& cfg) {
  TrainData data;
  for (const auto& [lang, path] : cfg.train_paths) {
    Corpus c = load_labeled(path);
    if (c.language != lang)
      throw ConfigError("train." + lang + ": corpus file declares language '" + c.language + "'");
    c.split = "train";
    data.train.emplace(lang, std::move(c));
  }
  for (const auto& [lang, path] : cfg.dev_paths) {
    Corpus c = load_labeled(path);
    if (c.language != lang)
      throw ConfigError("dev." + lang + ": corpus file declares language '" + c.language + "'");
    c.split = "dev";
    data.dev.emplace(lang, std::move(c));
  }
  for (const auto& [lang, path] : cfg.unlabeled_paths)
    data.unlabeled.emplace(lang, load_unlabeled(path, lang));
  return data;
}

inline std::vector<EmbeddingSpace> load_spaces(const TrainConfig& cfg) {
  std::vector<EmbeddingSpace> spaces;
  for (const auto& lang : cfg.languages()) {
    auto it = cfg.vector_paths.find(lang);
    if (it == cfg.vector_paths.end()) throw ConfigError("missing vectors." + lang);
    EmbeddingSpace sp =
        load_vectors(it->second, lang,
                     cfg.max_vocab > 0 ? std::optional<int>(cfg.max_vocab) : std::nullopt);
    auto ait = cfg.alignment_paths.find(lang);
    if (ait != cfg.alignment_paths.end()) apply_alignment(sp, load_alignment(ait->second));
    spaces.push_back(std::move(sp));
  }
  return spaces;
}

// ---------------------------------------------------------------------------
// Median-of-seeds driver

struct SeedRun {
  std::uint64_t seed = 0;
  TrainResult result;
};

struct MultiSeedResult {
  std::vector<SeedRun> runs;
  std::size_t selected = 0;  // run whose dev metric is the median
};

// Trains once per seed and selects the run with the median best combined
// dev relaxed F1. The trained models are reproducible from (config, seed),
// so callers re-train or checkpoint the selected seed as needed.
template <typename RunFn>
MultiSeedResult multi_seed_run(const std::vector<std::uint64_t>& seeds, RunFn run_one) {
  if (seeds.empty()) throw ContractError("multi_seed_run: no seeds");
  MultiSeedResult out;
  for (auto s : seeds) out.runs.push_back({s, run_one(s)});
  std::vector<std::size_t> order(out.runs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return out.runs[a].result.best_dev_relaxed_f1 < out.runs[b].result.best_dev_relaxed_f1;
  });
  out.selected = order[(order.size() - 1) / 2];
  return out;
}

}  // namespace tempalign
