#include <catch_amalgamated.hpp>

#include "support/tmpdir.hpp"
#include "tempalign/config.hpp"
#include "tempalign/corpus.hpp"
#include "tempalign/json_io.hpp"

using namespace tempalign;
using Catch::Approx;

TEST_CASE("labeled corpus loading") {
  tatest::TmpDir tmp("corpus");
  const auto path = tmp.write("c.txt",
                              "# lang: en\n"
                              "on\tO\n"
                              "friday\tB-DATE\n"
                              "\n"
                              "for\tO\n"
                              "two\tB-DURATION\n"
                              "weeks\tI-DURATION\n"
                              "\n");
  Corpus c = load_labeled(path);
  REQUIRE(c.language == "en");
  REQUIRE(c.size() == 2);
  REQUIRE(c.sentences[0].tokens == std::vector<std::string>{"on", "friday"});
  REQUIRE(c.sentences[0].doc_id == "s0");
  REQUIRE(c.sentences[1].gold_spans() == std::vector<TimexSpan>{{1, 2, TimexType::Duration}});
}

TEST_CASE("corpus format errors carry line numbers") {
  tatest::TmpDir tmp("corpus2");
  const auto three_cols = tmp.write("a.txt", "# lang: en\nx\tO\ty\tO\n");
  REQUIRE_THROWS_WITH(load_labeled(three_cols), Catch::Matchers::ContainsSubstring(":2:"));

  const auto ragged = tmp.write("b.txt", "# lang: en\nx\tO\ny\n");
  REQUIRE_THROWS_AS(load_labeled(ragged), FormatError);

  const auto bad_label = tmp.write("c.txt", "# lang: en\nx\tB-EVENT\n");
  REQUIRE_THROWS_WITH(load_labeled(bad_label), Catch::Matchers::ContainsSubstring("B-EVENT"));

  const auto no_lang = tmp.write("d.txt", "x\tO\n");
  REQUIRE_THROWS_AS(load_labeled(no_lang), FormatError);

  REQUIRE_THROWS_AS(load_labeled(tmp.file("missing.txt")), IoError);
}

TEST_CASE("invalid IOB2 sequences are repaired on load") {
  tatest::TmpDir tmp("corpus3");
  const auto path = tmp.write("r.txt",
                              "# lang: en\n"
                              "x\tO\n"
                              "y\tI-TIME\n");
  Corpus c = load_labeled(path);
  REQUIRE(c.sentences[0].gold_spans() == std::vector<TimexSpan>{{1, 1, TimexType::Time}});
  REQUIRE((*c.sentences[0].labels)[1] == LabelScheme::b_label(TimexType::Time));
}

TEST_CASE("document grouping and duplicate ids") {
  tatest::TmpDir tmp("corpus4");
  const auto path = tmp.write("d.txt",
                              "# lang: en\n"
                              "# doc: d1\n"
                              "a\tO\n"
                              "\n"
                              "b\tB-DATE\n"
                              "\n"
                              "# doc: d2\n"
                              "c\tB-SET\n"
                              "\n");
  Corpus c = load_labeled(path);
  REQUIRE(c.size() == 3);
  REQUIRE(c.sentences[0].doc_id == "d1");
  REQUIRE(c.sentences[1].doc_id == "d1");
  REQUIRE(c.sentences[2].doc_id == "d2");

  // Spans shift by sentence offsets inside a document.
  auto docs = document_spans(c);
  REQUIRE(docs.size() == 2);
  REQUIRE(docs["d1"] == std::vector<TimexSpan>{{1, 1, TimexType::Date}});
  REQUIRE(docs["d2"] == std::vector<TimexSpan>{{0, 0, TimexType::Set}});

  const auto dup = tmp.write("dup.txt",
                             "# lang: en\n# doc: d1\na\tO\n\n# doc: d2\nb\tO\n\n# doc: d1\nc\tO\n");
  REQUIRE_THROWS_AS(load_labeled(dup), DataError);
}

TEST_CASE("unlabeled corpora for tagging") {
  tatest::TmpDir tmp("corpus5");
  const auto path = tmp.write("u.txt",
                              "# lang: de\n"
                              "ein\n"
                              "testfall\n"
                              "\n");
  Corpus c = load_labeled(path);
  REQUIRE(c.size() == 1);
  REQUIRE_FALSE(c.sentences[0].labels.has_value());
}

TEST_CASE("unlabeled pool loading skips blank lines and round-trips tokens") {
  tatest::TmpDir tmp("pool");
  const auto path = tmp.write("p.txt", "der erste satz\n\nzweiter  satz\nnoch einer\n");
  auto pool = load_unlabeled(path, "de");
  REQUIRE(pool.size() == 3);
  REQUIRE(pool[1] == std::vector<std::string>{"zweiter", "satz"});

  std::string joined;
  for (const auto& tok : pool[0]) joined += (joined.empty() ? "" : " ") + tok;
  const auto again = tmp.write("p2.txt", joined + "\n");
  REQUIRE(load_unlabeled(again, "de")[0] == pool[0]);

  const auto empty = tmp.write("e.txt", "\n\n");
  REQUIRE(load_unlabeled(empty, "de").empty());
}

TEST_CASE("corpus save/load round-trip") {
  tatest::TmpDir tmp("corpus6");
  const auto path = tmp.write("c.txt",
                              "# lang: pt\n"
                              "ontem\tB-DATE\n"
                              "choveu\tO\n"
                              "\n");
  Corpus c = load_labeled(path);
  const auto out = tmp.file("c2.txt");
  save_labeled(c, out);
  Corpus c2 = load_labeled(out);
  REQUIRE(c2.language == c.language);
  REQUIRE(c2.size() == c.size());
  REQUIRE(c2.sentences[0].tokens == c.sentences[0].tokens);
  REQUIRE(*c2.sentences[0].labels == *c.sentences[0].labels);
}

TEST_CASE("config defaults when the file is empty") {
  tatest::TmpDir tmp("cfg");
  const auto path = tmp.write("empty.cfg", "");
  TrainConfig cfg = validate_config(path);
  REQUIRE(cfg.lr == Approx(1e-5));
  REQUIRE(cfg.epochs == 50);
  REQUIRE(cfg.patience == 5);
  REQUIRE(cfg.dropout == Approx(0.1));
  REQUIRE(cfg.lambda == Approx(0.001));
  REQUIRE(cfg.disc_interval == 10);
  REQUIRE(cfg.disc_hidden == 100);
  REQUIRE(cfg.lstm_hidden == 128);
  REQUIRE(cfg.batch_size == 32);
  REQUIRE(cfg.weight_decay == Approx(0.01));
  REQUIRE_FALSE(cfg.trainable_embeddings);
  REQUIRE(cfg.optimizer == "adamw");
}

TEST_CASE("config overrides and typo detection") {
  tatest::TmpDir tmp("cfg2");
  const auto good = tmp.write("good.cfg", "lambda = 0.01\n# comment\nseed=7\n");
  TrainConfig cfg = validate_config(good);
  REQUIRE(cfg.lambda == Approx(0.01));
  REQUIRE(cfg.seed == 7);

  const auto typo = tmp.write("typo.cfg", "lamda = 0.01\n");
  REQUIRE_THROWS_WITH(validate_config(typo), Catch::Matchers::ContainsSubstring("lamda"));
}

TEST_CASE("config errors aggregate") {
  tatest::TmpDir tmp("cfg3");
  const auto bad = tmp.write("bad.cfg",
                             "lr = abc\n"
                             "bogus = 1\n"
                             "dropout = 1.5\n");
  try {
    validate_config(bad);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    REQUIRE(msg.find("lr") != std::string::npos);
    REQUIRE(msg.find("bogus") != std::string::npos);
    REQUIRE(msg.find("dropout") != std::string::npos);
  }
}

TEST_CASE("config cross-checks: vectors required, files must exist") {
  tatest::TmpDir tmp("cfg4");
  const auto corpus = tmp.write("t.txt", "# lang: en\nx\tO\n");
  const auto vec = tmp.write("v.vec", "x 1 2\n");

  const auto missing_vec = tmp.write("a.cfg", "train.en = " + corpus + "\n");
  REQUIRE_THROWS_WITH(validate_config(missing_vec),
                      Catch::Matchers::ContainsSubstring("vectors.en"));

  const auto missing_file =
      tmp.write("b.cfg", "train.en = " + corpus + "\nvectors.en = /nonexistent/x.vec\n");
  REQUIRE_THROWS_WITH(validate_config(missing_file),
                      Catch::Matchers::ContainsSubstring("not found"));

  const auto ok = tmp.write("c.cfg", "train.en = " + corpus + "\nvectors.en = " + vec + "\n");
  TrainConfig cfg = validate_config(ok);
  REQUIRE(cfg.languages() == std::vector<std::string>{"en"});

  const auto dev_only =
      tmp.write("d.cfg", "dev.fr = " + corpus + "\nvectors.fr = " + vec + "\n");
  REQUIRE_THROWS_WITH(validate_config(dev_only),
                      Catch::Matchers::ContainsSubstring("dev.fr"));
}

TEST_CASE("prediction files round-trip and re-key onto documents") {
  tatest::TmpDir tmp("pred");
  Corpus gold;
  gold.language = "en";
  AnnotatedSentence s1;
  s1.tokens = {"a", "b", "c"};
  s1.doc_id = "d";
  AnnotatedSentence s2;
  s2.tokens = {"x", "y"};
  s2.doc_id = "d";
  gold.sentences = {s1, s2};

  std::vector<SentencePrediction> preds = {{0, "d", {{1, 2, TimexType::Date}}},
                                           {1, "d", {{0, 0, TimexType::Set}}}};
  const auto path = tmp.file("p.json");
  write_predictions("en", preds, path);
  std::string lang;
  auto loaded = read_predictions(path, &lang);
  REQUIRE(lang == "en");
  REQUIRE(loaded.size() == 2);
  REQUIRE(loaded[1].spans == std::vector<TimexSpan>{{0, 0, TimexType::Set}});

  auto docs = prediction_document_spans(gold, loaded);
  REQUIRE(docs["d"] == std::vector<TimexSpan>{{1, 2, TimexType::Date}, {3, 3, TimexType::Set}});

  // Out-of-range spans and count mismatches are data errors.
  auto bad = loaded;
  bad[0].spans[0].end = 10;
  REQUIRE_THROWS_AS(prediction_document_spans(gold, bad), DataError);
  loaded.pop_back();
  REQUIRE_THROWS_AS(prediction_document_spans(gold, loaded), DataError);
}
