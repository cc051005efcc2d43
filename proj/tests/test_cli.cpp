#include <catch_amalgamated.hpp>

#include "support/subprocess.hpp"
#include "support/synthetic.hpp"
#include "support/tmpdir.hpp"
#include "tempalign/json_io.hpp"
#include "tempalign/training.hpp"

using namespace tempalign;
using Catch::Approx;

namespace {

const std::string kCli = TEMPALIGN_CLI_PATH;

}  // namespace

TEST_CASE("cli: stats prints sentences / expressions") {
  tatest::TmpDir tmp("cli-stats");
  const auto path = tmp.write("c.txt",
                              "# lang: en\n"
                              "on\tO\nmonday\tB-DATE\n\n"
                              "empty\tO\n\n");
  auto r = tatest::run_cli(kCli, {"stats", "--input", path}, tmp, "stats");
  REQUIRE(r.exit_code == 0);
  REQUIRE(r.out == "2 / 1\n");
}

TEST_CASE("cli: evaluate on identical gold and predictions gives F1 = 1") {
  tatest::TmpDir tmp("cli-eval");
  const auto gold = tmp.write("g.txt",
                              "# lang: en\n"
                              "on\tO\nmonday\tB-DATE\nmorning\tI-DATE\n\n");
  std::vector<SentencePrediction> preds = {{0, "s0", {{1, 2, TimexType::Date}}}};
  const auto pred = tmp.file("p.json");
  write_predictions("en", preds, pred);

  auto r = tatest::run_cli(kCli, {"evaluate", "--gold", gold, "--pred", pred, "--json"}, tmp, "ev");
  REQUIRE(r.exit_code == 0);
  auto j = OrderedJson::parse(r.out);
  REQUIRE(j["strict"]["f1"].get<double>() == 1.0);
  REQUIRE(j["relaxed"]["f1"].get<double>() == 1.0);
  REQUIRE(j["type_f1"].get<double>() == 1.0);

  auto table = tatest::run_cli(kCli, {"evaluate", "--gold", gold, "--pred", pred}, tmp, "ev2");
  REQUIRE(table.exit_code == 0);
  REQUIRE(table.out.find("strict") != std::string::npos);
}

TEST_CASE("cli: significance of a system against itself is not significant") {
  tatest::TmpDir tmp("cli-sig");
  const auto gold = tmp.write("g.txt",
                              "# lang: en\n"
                              "a\tB-DATE\n\n"
                              "b\tO\nc\tB-SET\n\n");
  std::vector<SentencePrediction> preds = {{0, "s0", {{0, 0, TimexType::Date}}}, {1, "s1", {}}};
  const auto pa = tmp.file("a.json");
  const auto pb = tmp.file("b.json");
  write_predictions("en", preds, pa);
  write_predictions("en", preds, pb);
  auto r = tatest::run_cli(
      kCli, {"significance", "--gold", gold, "--predA", pa, "--predB", pb, "--seed", "3"}, tmp, "sig");
  REQUIRE(r.exit_code == 0);
  REQUIRE(r.out.find("p-value: 1.000000") != std::string::npos);
  REQUIRE(r.out.find("significant at alpha=0.05: no") != std::string::npos);
}

TEST_CASE("cli: train with a missing vectors path exits 1 naming the key") {
  tatest::TmpDir tmp("cli-train-bad");
  const auto corpus = tmp.write("t.txt", "# lang: en\nx\tO\n\n");
  const auto cfg = tmp.write("c.cfg", "train.en = " + corpus + "\n");
  auto r = tatest::run_cli(kCli, {"train", "--config", cfg}, tmp, "train");
  REQUIRE(r.exit_code == 1);
  REQUIRE(r.err.find("vectors.en") != std::string::npos);
}

TEST_CASE("cli: unknown flags and data errors use distinct exit codes") {
  tatest::TmpDir tmp("cli-exit");
  auto usage = tatest::run_cli(kCli, {"evaluate", "--nope", "x"}, tmp, "usage");
  REQUIRE(usage.exit_code == 1);

  const auto gold = tmp.write("g.txt", "# lang: en\na\tB-EVENT\n\n");
  const auto pred = tmp.file("p.json");
  write_predictions("en", {}, pred);
  auto data = tatest::run_cli(kCli, {"evaluate", "--gold", gold, "--pred", pred}, tmp, "data");
  REQUIRE(data.exit_code == 2);
}

TEST_CASE("cli: align fits and persists an orthogonal matrix") {
  tatest::TmpDir tmp("cli-align");
  RngStream rng(3, "cli-align");
  std::string src_lines, tgt_lines;
  Tensor rot = random_orthogonal(4, rng);
  for (int i = 0; i < 30; ++i) {
    std::string w = "w" + std::to_string(i);
    std::vector<double> x(4);
    for (auto& v : x) v = rng.normal();
    src_lines += w;
    tgt_lines += w;
    for (int j = 0; j < 4; ++j) {
      double y = 0.0;
      for (int k = 0; k < 4; ++k) y += rot.at(j, k) * x[static_cast<std::size_t>(k)];
      src_lines += " " + std::to_string(x[static_cast<std::size_t>(j)]);
      tgt_lines += " " + std::to_string(y);
    }
    src_lines += "\n";
    tgt_lines += "\n";
  }
  const auto src = tmp.write("de.vec", src_lines);
  const auto tgt = tmp.write("en.vec", tgt_lines);
  const auto out = tmp.file("de2en.vec");
  auto r = tatest::run_cli(kCli,
                           {"align", "--method", "string-match", "--src", "de", "--tgt", "en",
                            "--src-vectors", src, "--tgt-vectors", tgt, "--out", out},
                           tmp, "align");
  REQUIRE(r.exit_code == 0);
  REQUIRE(r.out.find("dictionary pairs: 30") != std::string::npos);
  AlignmentMatrix a = load_alignment(out);
  REQUIRE(a.source_language == "de");
  REQUIRE(max_orthogonality_error(a.matrix) < 1e-6);
}

TEST_CASE("cli: train, tag, evaluate and export round-trip") {
  tatest::TmpDir tmp("cli-pipeline");
  tatest::ToyPairOptions opt;
  opt.n_train = 40;
  opt.n_dev = 10;
  opt.n_test = 10;
  opt.dim = 8;
  auto pair = tatest::make_toy_pair(5, opt);

  save_labeled(pair.a.train, tmp.file("aa.train.txt"));
  save_labeled(pair.a.dev, tmp.file("aa.dev.txt"));
  save_labeled(pair.a.test, tmp.file("aa.test.txt"));
  save_vectors(pair.a.space, tmp.file("aa.vec"));

  const auto cfg = tmp.write("train.cfg",
                             "train.aa = " + tmp.file("aa.train.txt") + "\n" +
                             "dev.aa = " + tmp.file("aa.dev.txt") + "\n" +
                             "vectors.aa = " + tmp.file("aa.vec") + "\n" +
                             "epochs = 2\nbatch_size = 8\nlstm_hidden = 6\nseed = 3\n");
  auto train = tatest::run_cli(kCli, {"train", "--config", cfg, "--out-dir", tmp.file("run")},
                               tmp, "train");
  INFO(train.err);
  REQUIRE(train.exit_code == 0);
  const std::string ckpt = tmp.file("run/seed3.ckpt");
  REQUIRE(std::filesystem::exists(ckpt));
  REQUIRE(std::filesystem::exists(tmp.file("run/seed3.ckpt.manifest")));
  REQUIRE(std::filesystem::exists(tmp.file("run/seed3.log.jsonl")));
  auto summary = OrderedJson::parse(tatest::slurp(tmp.file("run/summary.json")));
  REQUIRE(summary["selected_seed"].get<std::uint64_t>() == 3);

  auto tag = tatest::run_cli(kCli,
                             {"tag", "--model", ckpt, "--input", tmp.file("aa.test.txt"), "--out",
                              tmp.file("pred.json")},
                             tmp, "tag");
  INFO(tag.err);
  REQUIRE(tag.exit_code == 0);

  auto ev = tatest::run_cli(kCli,
                            {"evaluate", "--gold", tmp.file("aa.test.txt"), "--pred",
                             tmp.file("pred.json"), "--json"},
                            tmp, "eval");
  REQUIRE(ev.exit_code == 0);
  auto j = OrderedJson::parse(ev.out);
  REQUIRE(j["counts"]["gold"].get<std::size_t>() == corpus_stats(pair.a.test).expressions);

  auto ex = tatest::run_cli(kCli,
                            {"export-embeddings", "--model", ckpt, "--input",
                             tmp.file("aa.test.txt"), "--out", tmp.file("f.tsv")},
                            tmp, "export");
  REQUIRE(ex.exit_code == 0);
  const std::string tsv = tatest::slurp(tmp.file("f.tsv"));
  REQUIRE(tsv.rfind("lang\ttoken\tf0", 0) == 0);

  // Idempotence: tagging again yields a byte-identical prediction file.
  auto tag2 = tatest::run_cli(kCli,
                              {"tag", "--model", ckpt, "--input", tmp.file("aa.test.txt"), "--out",
                               tmp.file("pred2.json")},
                              tmp, "tag2");
  REQUIRE(tag2.exit_code == 0);
  REQUIRE(tatest::slurp(tmp.file("pred.json")) == tatest::slurp(tmp.file("pred2.json")));
}
