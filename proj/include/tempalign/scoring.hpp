#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "tempalign/corpus.hpp"
#include "tempalign/rng.hpp"
#include "tempalign/spans.hpp"

namespace tempalign {

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

inline Prf make_prf(std::size_t matches, std::size_t pred, std::size_t gold) {
  Prf out;
  out.precision = pred == 0 ? 0.0 : static_cast<double>(matches) / static_cast<double>(pred);
  out.recall = gold == 0 ? 0.0 : static_cast<double>(matches) / static_cast<double>(gold);
  out.f1 = (out.precision + out.recall) == 0.0
               ? 0.0
               : 2.0 * out.precision * out.recall / (out.precision + out.recall);
  return out;
}

struct ScoreReport {
  Prf strict;
  Prf relaxed;
  double type_f1 = 0.0;           // type-correct relaxed matches over the same P/R denominators
  double type_f1_weighted = 0.0;  // TempEval3-style: type accuracy among matches x relaxed F1
  std::size_t gold_count = 0;
  std::size_t pred_count = 0;
  std::size_t strict_matches = 0;
  std::size_t relaxed_matches = 0;
  std::size_t type_matches = 0;
};

using DocumentSpans = std::map<std::string, std::vector<TimexSpan>>;

namespace detail {

struct MatchCounts {
  std::size_t gold = 0, pred = 0, strict = 0, relaxed = 0, type = 0;
};

// One document: both span lists are non-overlapping; matching is greedy
// left-to-right and one-to-one, which is maximal for disjoint interval
// families.
inline MatchCounts match_document(std::vector<TimexSpan> gold, std::vector<TimexSpan> pred) {
  auto by_start = [](const TimexSpan& a, const TimexSpan& b) { return a.start < b.start; };
  std::sort(gold.begin(), gold.end(), by_start);
  std::sort(pred.begin(), pred.end(), by_start);
  MatchCounts c;
  c.gold = gold.size();
  c.pred = pred.size();
  std::size_t i = 0, j = 0;
  while (i < gold.size() && j < pred.size()) {
    if (spans_overlap(gold[i], pred[j])) {
      ++c.relaxed;
      if (gold[i].type == pred[j].type) ++c.type;
      ++i;
      ++j;
    } else if (gold[i].end < pred[j].start) {
      ++i;
    } else {
      ++j;
    }
  }
  // Strict matches are boundary-identical pairs, counted independently of
  // the relaxed pairing.
  std::size_t a = 0, b = 0;
  while (a < gold.size() && b < pred.size()) {
    if (gold[a].start == pred[b].start && gold[a].end == pred[b].end) {
      ++c.strict;
      ++a;
      ++b;
    } else if (gold[a].start < pred[b].start ||
               (gold[a].start == pred[b].start && gold[a].end < pred[b].end)) {
      ++a;
    } else {
      ++b;
    }
  }
  return c;
}

}  // namespace detail

inline ScoreReport score_counts(const detail::MatchCounts& c) {
  ScoreReport r;
  r.gold_count = c.gold;
  r.pred_count = c.pred;
  r.strict_matches = c.strict;
  r.relaxed_matches = c.relaxed;
  r.type_matches = c.type;
  r.strict = make_prf(c.strict, c.pred, c.gold);
  r.relaxed = make_prf(c.relaxed, c.pred, c.gold);
  const Prf type_prf = make_prf(c.type, c.pred, c.gold);
  r.type_f1 = type_prf.f1;
  r.type_f1_weighted =
      c.relaxed == 0 ? 0.0 : (static_cast<double>(c.type) / static_cast<double>(c.relaxed)) * r.relaxed.f1;
  return r;
}

// TempEval3-style span scoring, micro-averaged over documents. Strict
// matches require identical boundaries; relaxed matches any token overlap,
// one-to-one; type matches are relaxed matches with agreeing type.
inline ScoreReport score(const DocumentSpans& gold, const DocumentSpans& pred) {
  if (gold.size() != pred.size())
    throw DataError("score: gold has " + std::to_string(gold.size()) + " documents, predictions " +
                    std::to_string(pred.size()));
  detail::MatchCounts total;
  auto git = gold.begin();
  auto pit = pred.begin();
  for (; git != gold.end(); ++git, ++pit) {
    if (git->first != pit->first)
      throw DataError("score: document mismatch: gold '" + git->first + "' vs predicted '" +
                      pit->first + "'");
    const auto c = detail::match_document(git->second, pit->second);
    total.gold += c.gold;
    total.pred += c.pred;
    total.strict += c.strict;
    total.relaxed += c.relaxed;
    total.type += c.type;
  }
  return score_counts(total);
}

inline ScoreReport score_document(const std::vector<TimexSpan>& gold,
                                  const std::vector<TimexSpan>& pred) {
  return score_counts(detail::match_document(gold, pred));
}

// Per-document value of one metric, in document-id order; the unit the
// significance test permutes over.
enum class Metric { Strict, Relaxed, Type };

inline Metric metric_from_name(const std::string& name) {
  if (name == "strict") return Metric::Strict;
  if (name == "relaxed") return Metric::Relaxed;
  if (name == "type") return Metric::Type;
  throw ParameterError("unknown metric '" + name + "' (expected strict, relaxed or type)");
}

inline double metric_value(const ScoreReport& r, Metric m) {
  switch (m) {
    case Metric::Strict: return r.strict.f1;
    case Metric::Relaxed: return r.relaxed.f1;
    case Metric::Type: return r.type_f1;
  }
  return 0.0;
}

inline std::vector<double> per_document_metric(const DocumentSpans& gold, const DocumentSpans& pred,
                                               Metric m) {
  if (gold.size() != pred.size()) throw DataError("per-document metric: document sets differ");
  std::vector<double> out;
  auto git = gold.begin();
  auto pit = pred.begin();
  for (; git != gold.end(); ++git, ++pit) {
    if (git->first != pit->first) throw DataError("per-document metric: document mismatch");
    out.push_back(metric_value(score_document(git->second, pit->second), m));
  }
  return out;
}

// Two-sided paired permutation test on per-document score differences:
// random sign flips of the differences, p = share of flipped means at least
// as extreme as the observed one (add-one smoothed, so p is in (0, 1]).
inline double paired_permutation_test(const std::vector<double>& a, const std::vector<double>& b,
                                      int iterations = 10000, std::uint64_t seed = 0) {
  if (a.empty() || a.size() != b.size())
    throw ContractError("permutation test: need equal-length non-empty score lists");
  const std::size_t n = a.size();
  std::vector<double> diff(n);
  for (std::size_t i = 0; i < n; ++i) diff[i] = a[i] - b[i];
  double obs = 0.0;
  for (double d : diff) obs += d;
  obs = std::abs(obs / static_cast<double>(n));

  RngStream rng(seed, "permutation-test");
  const double tol = 1e-12;
  long hits = 0;
  for (int it = 0; it < iterations; ++it) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += (rng.next_u64() & 1) ? -diff[i] : diff[i];
    if (std::abs(s / static_cast<double>(n)) >= obs - tol) ++hits;
  }
  return static_cast<double>(hits + 1) / static_cast<double>(iterations + 1);
}

// Exact version enumerating all 2^n sign patterns; n is capped because the
// enumeration doubles per document.
inline double exact_permutation_test(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.empty() || a.size() != b.size())
    throw ContractError("permutation test: need equal-length non-empty score lists");
  const std::size_t n = a.size();
  if (n > 20) throw ParameterError("exact permutation test: too many documents (max 20)");
  std::vector<double> diff(n);
  for (std::size_t i = 0; i < n; ++i) diff[i] = a[i] - b[i];
  double obs = 0.0;
  for (double d : diff) obs += d;
  obs = std::abs(obs / static_cast<double>(n));
  const double tol = 1e-12;
  const std::uint64_t total = 1ULL << n;
  std::uint64_t hits = 0;
  for (std::uint64_t mask = 0; mask < total; ++mask) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += (mask >> i) & 1 ? -diff[i] : diff[i];
    if (std::abs(s / static_cast<double>(n)) >= obs - tol) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(total);
}

struct CorpusStats {
  std::size_t sentences = 0;
  std::size_t expressions = 0;
};

inline CorpusStats corpus_stats(const Corpus& corpus) {
  CorpusStats s;
  s.sentences = corpus.size();
  for (const auto& sent : corpus.sentences) s.expressions += sent.gold_spans().size();
  return s;
}

}  // namespace tempalign
