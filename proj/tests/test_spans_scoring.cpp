#include <catch_amalgamated.hpp>

#include <cmath>

#include "tempalign/rng.hpp"
#include "tempalign/scoring.hpp"

using namespace tempalign;
using Catch::Approx;

namespace {

std::vector<TimexSpan> random_span_set(RngStream& rng, int length) {
  std::vector<TimexSpan> spans;
  int pos = 0;
  while (pos < length) {
    if (rng.uniform() < 0.35) {
      const int len = 1 + static_cast<int>(rng.below(3));
      const int end = std::min(length - 1, pos + len - 1);
      spans.push_back({pos, end, static_cast<TimexType>(rng.below(4))});
      pos = end + 2;  // leave a gap so spans stay disjoint
    } else {
      ++pos;
    }
  }
  return spans;
}

}  // namespace

TEST_CASE("iob2 decoding with repair") {
  REQUIRE(iob2_to_spans(std::vector<std::string>{"B-DATE", "I-DATE", "O"}) ==
          std::vector<TimexSpan>{{0, 1, TimexType::Date}});
  REQUIRE(iob2_to_spans(std::vector<std::string>{"O", "I-TIME"}) ==
          std::vector<TimexSpan>{{1, 1, TimexType::Time}});
  REQUIRE(iob2_to_spans(std::vector<std::string>{"B-DATE", "I-TIME"}) ==
          std::vector<TimexSpan>{{0, 0, TimexType::Date}, {1, 1, TimexType::Time}});
  REQUIRE(iob2_to_spans(std::vector<std::string>{"B-SET", "B-SET"}) ==
          std::vector<TimexSpan>{{0, 0, TimexType::Set}, {1, 1, TimexType::Set}});
  REQUIRE_THROWS_AS(iob2_to_spans(std::vector<std::string>{"B-EVENT"}), DataError);
  REQUIRE_THROWS_AS(iob2_to_spans(std::vector<int>{0, 13}), DataError);
}

TEST_CASE("iob2 encoding") {
  auto labels = spans_to_iob2({{0, 1, TimexType::Date}}, 3);
  REQUIRE(labels == std::vector<int>{LabelScheme::b_label(TimexType::Date),
                                     LabelScheme::i_label(TimexType::Date), 0});
  REQUIRE(spans_to_iob2({}, 2) == std::vector<int>{0, 0});
  REQUIRE_THROWS_AS(spans_to_iob2({{0, 2, TimexType::Date}, {2, 3, TimexType::Set}}, 5), DataError);
  REQUIRE_THROWS_AS(spans_to_iob2({{0, 5, TimexType::Date}}, 3), DataError);
}

TEST_CASE("span round-trip is the identity on valid span sets") {
  RngStream rng(61, "roundtrip");
  for (int trial = 0; trial < 100; ++trial) {
    const int length = 1 + static_cast<int>(rng.below(20));
    auto spans = random_span_set(rng, length);
    auto labels = spans_to_iob2(spans, length);
    REQUIRE(iob2_to_spans(labels) == spans);
  }
}

TEST_CASE("scoring hand examples") {
  SECTION("exact match") {
    ScoreReport r = score({{"d", {{0, 2, TimexType::Date}}}}, {{"d", {{0, 2, TimexType::Date}}}});
    REQUIRE(r.strict.f1 == 1.0);
    REQUIRE(r.relaxed.f1 == 1.0);
    REQUIRE(r.type_f1 == 1.0);
  }
  SECTION("partial overlap: strict 0, relaxed 1, type 1") {
    ScoreReport r = score({{"d", {{0, 2, TimexType::Date}}}}, {{"d", {{1, 3, TimexType::Date}}}});
    REQUIRE(r.strict.f1 == 0.0);
    REQUIRE(r.relaxed.f1 == 1.0);
    REQUIRE(r.type_f1 == 1.0);
  }
  SECTION("hand-computed precision/recall with a type error") {
    ScoreReport r = score({{"d", {{0, 1, TimexType::Date}, {5, 6, TimexType::Set}}}},
                          {{"d", {{0, 1, TimexType::Time}}}});
    REQUIRE(r.strict.precision == 1.0);
    REQUIRE(r.strict.recall == Approx(0.5));
    REQUIRE(r.strict.f1 == Approx(2.0 / 3.0));
    REQUIRE(r.relaxed.f1 == Approx(2.0 / 3.0));
    REQUIRE(r.type_f1 == 0.0);
  }
  SECTION("empty predictions score zero without crashing") {
    ScoreReport r = score({{"d", {{0, 1, TimexType::Date}}}}, {{"d", {}}});
    REQUIRE(r.relaxed.f1 == 0.0);
    REQUIRE(r.pred_count == 0);
  }
  SECTION("document mismatch is a data error") {
    REQUIRE_THROWS_AS(score({{"a", {}}}, {{"b", {}}}), DataError);
    REQUIRE_THROWS_AS(score({{"a", {}}, {"b", {}}}, {{"a", {}}}), DataError);
  }
}

TEST_CASE("scoring properties on random span sets") {
  RngStream rng(67, "score-prop");
  for (int trial = 0; trial < 1000; ++trial) {
    const int length = 5 + static_cast<int>(rng.below(25));
    DocumentSpans gold{{"d", random_span_set(rng, length)}};
    DocumentSpans pred{{"d", random_span_set(rng, length)}};
    ScoreReport r = score(gold, pred);

    // strict <= relaxed, type <= relaxed, all within [0, 1]
    REQUIRE(r.strict_matches <= r.relaxed_matches);
    REQUIRE(r.type_matches <= r.relaxed_matches);
    REQUIRE(r.strict.f1 <= r.relaxed.f1 + 1e-12);
    REQUIRE(r.type_f1 <= r.relaxed.f1 + 1e-12);

    // Swapping gold and predictions swaps precision and recall exactly.
    ScoreReport s = score(pred, gold);
    REQUIRE(s.strict.precision == Approx(r.strict.recall).margin(1e-15));
    REQUIRE(s.strict.recall == Approx(r.strict.precision).margin(1e-15));
    REQUIRE(s.relaxed.f1 == Approx(r.relaxed.f1).margin(1e-12));
    REQUIRE(s.strict.f1 == Approx(r.strict.f1).margin(1e-12));
  }
}

TEST_CASE("an unmatched extra prediction lowers precision, not recall") {
  DocumentSpans gold{{"d", {{0, 1, TimexType::Date}}}};
  DocumentSpans pred{{"d", {{0, 1, TimexType::Date}}}};
  ScoreReport before = score(gold, pred);
  pred["d"].push_back({10, 11, TimexType::Set});
  ScoreReport after = score(gold, pred);
  REQUIRE(after.relaxed.precision < before.relaxed.precision);
  REQUIRE(after.relaxed.recall == before.relaxed.recall);
}

TEST_CASE("permutation test basics") {
  std::vector<double> a = {0.5, 0.7, 0.9, 0.4};
  REQUIRE(paired_permutation_test(a, a, 5000, 3) == 1.0);
  REQUIRE_THROWS_AS(paired_permutation_test({}, {}, 100, 1), ContractError);

  // Deterministic given the seed.
  std::vector<double> b = {0.4, 0.8, 0.7, 0.6};
  const double p1 = paired_permutation_test(a, b, 2000, 7);
  const double p2 = paired_permutation_test(a, b, 2000, 7);
  REQUIRE(p1 == p2);
  REQUIRE(p1 > 0.0);
  REQUIRE(p1 <= 1.0);
}

TEST_CASE("uniform positive differences are highly significant") {
  // 50 documents with A - B = +0.5: exact enumeration at n=10 shows only the
  // all-positive and all-negative patterns reach the observed mean.
  std::vector<double> a10(10, 0.9), b10(10, 0.4);
  REQUIRE(exact_permutation_test(a10, b10) == Approx(2.0 / 1024.0));
  std::vector<double> a50(50, 0.9), b50(50, 0.4);
  REQUIRE(paired_permutation_test(a50, b50, 10000, 5) < 0.001);
}

TEST_CASE("monte-carlo matches exact enumeration at n=10") {
  RngStream rng(71, "mc-exact");
  std::vector<double> a, b;
  for (int i = 0; i < 10; ++i) {
    a.push_back(rng.uniform());
    b.push_back(rng.uniform());
  }
  const double exact = exact_permutation_test(a, b);
  const double mc = paired_permutation_test(a, b, 10000, 11);
  REQUIRE(std::abs(exact - mc) < 0.02);
}

TEST_CASE("per-document metrics feed the test") {
  DocumentSpans gold{{"a", {{0, 1, TimexType::Date}}}, {"b", {{2, 3, TimexType::Set}}}};
  DocumentSpans pred{{"a", {{0, 1, TimexType::Date}}}, {"b", {}}};
  auto v = per_document_metric(gold, pred, Metric::Relaxed);
  REQUIRE(v == std::vector<double>{1.0, 0.0});
}

TEST_CASE("corpus statistics") {
  Corpus c;
  c.language = "en";
  REQUIRE(corpus_stats(c).sentences == 0);
  REQUIRE(corpus_stats(c).expressions == 0);

  AnnotatedSentence s1;
  s1.tokens = {"a", "b", "c"};
  s1.labels = spans_to_iob2({{0, 1, TimexType::Date}}, 3);
  AnnotatedSentence s2;
  s2.tokens = {"d"};
  s2.labels = std::vector<int>{0};
  c.sentences = {s1, s2};
  const auto st = corpus_stats(c);
  REQUIRE(st.sentences == 2);
  REQUIRE(st.expressions == 1);
}
