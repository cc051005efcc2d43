#pragma once

#include <limits>
#include <string>
#include <vector>

#include "tempalign/labels.hpp"
#include "tempalign/optim.hpp"
#include "tempalign/ops.hpp"

namespace tempalign {

// Linear-chain CRF output layer: a projection from encoder states to
// per-label emission scores plus label-transition, start and end scores.
// All scores start at zero. The partition function is computed by the
// forward algorithm in log space, so the negative log-likelihood is exact
// and differentiable end to end.
class CrfLayer {
 public:
  CrfLayer() = default;

  explicit CrfLayer(int input_dim, int num_labels = LabelScheme::kNumLabels)
      : input_dim_(input_dim), num_labels_(num_labels) {
    if (num_labels < 1) throw ParameterError("crf: need at least one label");
    proj_w_ = Tensor::zeros({input_dim, num_labels}, true);
    proj_b_ = Tensor::zeros({num_labels}, true);
    trans_ = Tensor::zeros({num_labels, num_labels}, true);
    start_ = Tensor::zeros({num_labels}, true);
    end_ = Tensor::zeros({num_labels}, true);
    validate_iob2_ = (num_labels == LabelScheme::kNumLabels);
  }

  int num_labels() const { return num_labels_; }

  // Emission scores from encoder output, n x L.
  Tensor emissions(const Tensor& encoded) const { return add(matmul(encoded, proj_w_), proj_b_); }

  // Forward-algorithm log-partition, a scalar.
  Tensor log_partition(const Tensor& emissions) const {
    check_emissions(emissions);
    const int n = emissions.rows();
    Tensor alpha = add(start_, row(emissions, 0));
    for (int t = 1; t < n; ++t)
      alpha = add(log_sum_exp(add_cols(trans_, alpha), 0), row(emissions, t));
    return log_sum_exp(add(alpha, end_), 0);
  }

  // Score of one labeled path.
  Tensor path_score(const Tensor& emissions, const std::vector<int>& labels) const {
    check_emissions(emissions);
    if (labels.size() != static_cast<std::size_t>(emissions.rows()))
      throw ContractError("path_score: " + std::to_string(labels.size()) + " labels for " +
                          std::to_string(emissions.rows()) + " positions");
    for (int l : labels)
      if (l < 0 || l >= num_labels_) throw DataError("path_score: label index out of range");
    Tensor s = add(pick(start_, labels.front()), pick(emissions, 0, labels.front()));
    for (std::size_t t = 1; t < labels.size(); ++t) {
      s = add(s, pick(trans_, labels[t - 1], labels[t]));
      s = add(s, pick(emissions, static_cast<int>(t), labels[t]));
    }
    return add(s, pick(end_, labels.back()));
  }

  // Negative log-likelihood of the gold path: logZ - score(gold), >= 0.
  Tensor log_likelihood_loss(const Tensor& emissions, const std::vector<int>& gold,
                             const std::string& context = "") const {
    if (validate_iob2_ && !LabelScheme::valid_sequence(gold))
      throw DataError("invalid IOB2 gold sequence" + (context.empty() ? "" : " in " + context));
    return sub(log_partition(emissions), path_score(emissions, gold));
  }

  struct DecodeResult {
    std::vector<int> labels;
    double score = 0.0;
  };

  // Viterbi decode. Ties break toward the lowest label index. With
  // constrained decoding enabled, transitions that violate IOB2 are
  // excluded; by default the model may emit invalid sequences, which the
  // span decoder repairs.
  DecodeResult viterbi(const Tensor& emissions) const {
    check_emissions(emissions);
    const int n = emissions.rows(), L = num_labels_;
    constexpr double kNegInf = -std::numeric_limits<double>::infinity();

    std::vector<double> score(static_cast<std::size_t>(L));
    for (int j = 0; j < L; ++j) {
      const bool ok = !constrained_decode_ || allowed_start(j);
      score[static_cast<std::size_t>(j)] = ok ? start_.data()[j] + emissions.at(0, j) : kNegInf;
    }
    std::vector<int> back(static_cast<std::size_t>(std::max(0, n - 1)) * L, 0);
    std::vector<double> next(static_cast<std::size_t>(L));
    for (int t = 1; t < n; ++t) {
      for (int j = 0; j < L; ++j) {
        double best = kNegInf;
        int best_i = 0;
        for (int i = 0; i < L; ++i) {
          if (constrained_decode_ && !allowed_transition(i, j)) continue;
          const double s = score[static_cast<std::size_t>(i)] + trans_.at(i, j);
          if (s > best) {
            best = s;
            best_i = i;
          }
        }
        next[static_cast<std::size_t>(j)] = best + emissions.at(t, j);
        back[static_cast<std::size_t>(t - 1) * L + j] = best_i;
      }
      score.swap(next);
    }
    for (int j = 0; j < L; ++j) score[static_cast<std::size_t>(j)] += end_.data()[j];

    DecodeResult out;
    int best_j = 0;
    for (int j = 1; j < L; ++j)
      if (score[static_cast<std::size_t>(j)] > score[static_cast<std::size_t>(best_j)]) best_j = j;
    out.score = score[static_cast<std::size_t>(best_j)];
    out.labels.assign(static_cast<std::size_t>(n), 0);
    out.labels[static_cast<std::size_t>(n - 1)] = best_j;
    for (int t = n - 2; t >= 0; --t)
      out.labels[static_cast<std::size_t>(t)] =
          back[static_cast<std::size_t>(t) * L + out.labels[static_cast<std::size_t>(t + 1)]];
    return out;
  }

  void set_constrained_decode(bool on) { constrained_decode_ = on; }
  void set_validate_iob2(bool on) { validate_iob2_ = on; }

  void collect_params(ParamList& out) const {
    out.push_back({"crf.proj_w", proj_w_});
    out.push_back({"crf.proj_b", proj_b_});
    out.push_back({"crf.trans", trans_});
    out.push_back({"crf.start", start_});
    out.push_back({"crf.end", end_});
  }

  Tensor& projection_weight() { return proj_w_; }
  Tensor& projection_bias() { return proj_b_; }
  Tensor& transitions() { return trans_; }
  Tensor& start_scores() { return start_; }
  Tensor& end_scores() { return end_; }

 private:
  void check_emissions(const Tensor& emissions) const {
    if (emissions.rank() != 2 || emissions.rows() < 1 || emissions.cols() != num_labels_)
      throw ContractError("crf: expected non-empty n x " + std::to_string(num_labels_) +
                          " emissions, got " + shape_str(emissions.shape()));
  }

  static bool allowed_start(int j) {
    return !LabelScheme::is_i(j);
  }
  static bool allowed_transition(int i, int j) {
    if (!LabelScheme::is_i(j)) return true;
    if (i == LabelScheme::kOutside) return false;
    return LabelScheme::type_of(i) == LabelScheme::type_of(j);
  }

  int input_dim_ = 0;
  int num_labels_ = 0;
  bool validate_iob2_ = false;
  bool constrained_decode_ = false;
  Tensor proj_w_, proj_b_, trans_, start_, end_;
};

}  // namespace tempalign
