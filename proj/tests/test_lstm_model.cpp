#include <catch_amalgamated.hpp>

#include <cmath>

#include "support/finite_diff.hpp"
#include "support/synthetic.hpp"
#include "support/tmpdir.hpp"
#include "tempalign/model.hpp"

using namespace tempalign;
using Catch::Approx;

namespace {

EmbeddingSpace tiny_space(const std::string& lang, int dim, std::uint64_t seed) {
  EmbeddingSpace sp;
  sp.language = lang;
  for (int i = 0; i < 6; ++i) sp.vocab.add(lang + "w" + std::to_string(i));
  sp.vectors = Tensor::zeros({8, dim});
  RngStream rng(seed, "tiny-space", {detail::fnv1a(lang)});
  for (int i = 2; i < 8; ++i)
    for (int j = 0; j < dim; ++j) sp.vectors.at(i, j) = rng.normal();
  return sp;
}

TaggerModel tiny_model(int dim = 4, int hidden = 3, std::uint64_t seed = 1,
                       bool trainable = false) {
  ModelInit init;
  init.lstm_hidden = hidden;
  init.disc_hidden = 5;
  init.trainable_embeddings = trainable;
  init.seed = seed;
  return TaggerModel({tiny_space("aa", dim, seed), tiny_space("bb", dim, seed + 1)}, init);
}

}  // namespace

TEST_CASE("bilstm output shape and single-token sequences") {
  RngStream rng(3, "lstm-shape");
  BiLstmEncoder enc(4, 5, rng);
  REQUIRE(enc.output_dim() == 10);
  for (int n : {1, 2, 7}) {
    Tensor x = Tensor::zeros({n, 4});
    for (auto& v : x.data()) v = rng.normal();
    Tensor h = enc.encode(x);
    REQUIRE(h.shape() == Shape{n, 10});
  }
  REQUIRE_THROWS_AS(enc.encode(Tensor::zeros({4})), ContractError);
}

TEST_CASE("reversing the input reverses the backward states") {
  RngStream rng(5, "lstm-reverse");
  BiLstmEncoder enc(3, 4, rng);
  const int n = 5;
  Tensor x = Tensor::zeros({n, 3});
  for (auto& v : x.data()) v = rng.normal();
  Tensor xrev = Tensor::zeros({n, 3});
  for (int t = 0; t < n; ++t)
    for (int j = 0; j < 3; ++j) xrev.at(t, j) = x.at(n - 1 - t, j);

  auto fwd_states = enc.forward_cell().run(x, false);
  auto bwd_states = enc.backward_cell().run(xrev, true);
  // The backward cell on reversed input at position t equals the forward
  // recurrence applied to the original order, mirrored.
  auto fwd_on_rev = enc.backward_cell().run(x, false);
  for (int t = 0; t < n; ++t)
    for (int j = 0; j < 4; ++j)
      REQUIRE(bwd_states[static_cast<std::size_t>(t)].data()[static_cast<std::size_t>(j)] ==
              Approx(fwd_on_rev[static_cast<std::size_t>(n - 1 - t)].data()[static_cast<std::size_t>(j)]).margin(1e-12));
  (void)fwd_states;
}

TEST_CASE("lstm initialization: orthogonal recurrent blocks, forget bias one") {
  RngStream rng(7, "lstm-init");
  LstmCell cell(4, 6, rng, "cell");
  // Each 6x6 gate block of w_hh is orthogonal.
  for (int gate = 0; gate < 4; ++gate) {
    for (int a = 0; a < 6; ++a)
      for (int b = 0; b < 6; ++b) {
        double dot = 0.0;
        for (int i = 0; i < 6; ++i)
          dot += cell.w_hh().at(i, gate * 6 + a) * cell.w_hh().at(i, gate * 6 + b);
        REQUIRE(dot == Approx(a == b ? 1.0 : 0.0).margin(1e-10));
      }
  }
  for (int j = 0; j < 6; ++j) {
    REQUIRE(cell.bias().data()[static_cast<std::size_t>(6 + j)] == 1.0);   // forget gate
    REQUIRE(cell.bias().data()[static_cast<std::size_t>(j)] == 0.0);       // input gate
  }
}

TEST_CASE("gradients flow through the bilstm") {
  RngStream rng(11, "lstm-fd");
  BiLstmEncoder enc(3, 4, rng);
  Tensor x = Tensor::zeros({3, 3}, true);
  for (auto& v : x.data()) v = rng.normal();
  ParamList params{{"x", x}};
  enc.collect_params(params);
  auto res = tatest::finite_diff_check([&] { return mean(tanh(enc.encode(x))); }, params);
  REQUIRE(res.max_rel_err < 1e-4);
}

TEST_CASE("feature extractor equals tanh(W^T E(x))") {
  TaggerModel model = tiny_model();
  auto& sp = model.space("aa");
  const std::vector<std::string> tokens = {"aaw0", "aaw3"};

  SECTION("W = 0 gives zero features") {
    for (auto& v : model.feature_extractor().weight().data()) v = 0.0;
    Tensor f = model.feature_extract(tokens, "aa");
    for (double v : f.data()) REQUIRE(v == 0.0);
  }
  SECTION("W = I gives tanh of the embedding") {
    auto& w = model.feature_extractor().weight();
    for (auto& v : w.data()) v = 0.0;
    for (int i = 0; i < 4; ++i) w.at(i, i) = 1.0;
    Tensor f = model.feature_extract(tokens, "aa");
    auto e0 = sp.lookup("aaw0");
    for (int j = 0; j < 4; ++j) REQUIRE(f.at(0, j) == Approx(std::tanh(e0[static_cast<std::size_t>(j)])));
  }
  SECTION("random W matches an independent recomputation") {
    Tensor f = model.feature_extract(tokens, "aa");
    const auto& w = model.feature_extractor().weight();
    for (std::size_t t = 0; t < tokens.size(); ++t) {
      auto e = sp.lookup(tokens[t]);
      for (int j = 0; j < 4; ++j) {
        double acc = 0.0;
        for (int i = 0; i < 4; ++i) acc += e[static_cast<std::size_t>(i)] * w.at(i, j);
        REQUIRE(f.at(static_cast<int>(t), j) == Approx(std::tanh(acc)).margin(1e-12));
      }
    }
  }
  SECTION("outputs stay inside the tanh range") {
    Tensor f = model.feature_extract(tokens, "aa");
    for (double v : f.data()) {
      REQUIRE(v > -1.0);
      REQUIRE(v < 1.0);
    }
  }
  REQUIRE_THROWS_AS(model.feature_extract(tokens, "zz"), ConfigError);
  REQUIRE_THROWS_AS(model.feature_extract({}, "aa"), ContractError);
}

TEST_CASE("discriminator outputs valid distributions") {
  TaggerModel model = tiny_model();
  Tensor f = model.feature_extract({"aaw0", "aaw1", "aaw2"}, "aa");
  Tensor p = model.discriminator().probabilities(f, 0.001);
  REQUIRE(p.shape() == Shape{3, 2});
  for (int t = 0; t < 3; ++t) {
    double s = 0.0;
    for (int o = 0; o < 2; ++o) {
      REQUIRE(p.at(t, o) >= 0.0);
      s += p.at(t, o);
    }
    REQUIRE(std::abs(s - 1.0) < 1e-12);
  }

  // V = 0 gives the uniform distribution everywhere.
  for (auto& v : model.discriminator().v().data()) v = 0.0;
  Tensor pu = model.discriminator().probabilities(f, 0.0);
  for (double v : pu.data()) REQUIRE(v == Approx(0.5));

  RngStream rng(1, "disc-guard");
  REQUIRE_THROWS_AS(Discriminator(4, 5, 1, rng), ConfigError);
}

TEST_CASE("lambda = 0 blocks discriminator gradients into the feature extractor") {
  TaggerModel model = tiny_model();
  auto check = [&](double lambda) {
    model.zero_all_grads();
    Tape tape;
    Tensor f = model.feature_extract({"aaw0", "aaw1"}, "aa");
    Tensor loss = model.discriminator().loss(f, 0, lambda);
    tape.backward(loss);
    double w_norm = 0.0;
    for (double g : model.feature_extractor().weight().grad()) w_norm += g * g;
    double d_norm = 0.0;
    for (double g : model.discriminator().v().grad()) d_norm += g * g;
    return std::make_pair(w_norm, d_norm);
  };
  auto [w0, d0] = check(0.0);
  REQUIRE(w0 == 0.0);       // theta_F untouched exactly
  REQUIRE(d0 > 0.0);        // theta_D still learns
  auto [w1, d1] = check(0.5);
  REQUIRE(w1 > 0.0);
  REQUIRE(d1 > 0.0);
}

TEST_CASE("discriminator gradients match finite differences") {
  TaggerModel model = tiny_model();
  const double lambda = 0.7;
  auto build = [&] {
    Tensor f = model.feature_extract({"aaw0", "aaw1", "aaw4"}, "aa");
    return model.discriminator().loss(f, 1, lambda);
  };

  // theta_D sits above the reversal node: plain finite differences apply.
  ParamList disc_params = model.params_theta_d();
  auto res = tatest::finite_diff_check(build, disc_params);
  REQUIRE(res.max_rel_err < 1e-4);

  // theta_F sits below it: autodiff must carry exactly -lambda times the
  // numeric derivative of the loss.
  Tensor w = model.feature_extractor().weight();
  w.zero_grad();
  {
    Tape tape;
    tape.backward(build());
  }
  auto forward = [&] { return build().value(); };
  auto& data = w.data();
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double orig = data[i];
    const double h = 1e-5;
    data[i] = orig + h;
    const double fp = forward();
    data[i] = orig - h;
    const double fm = forward();
    data[i] = orig;
    const double numeric = (fp - fm) / (2.0 * h);
    REQUIRE(tatest::rel_err(w.grad()[i], -lambda * numeric) < 1e-4);
  }
}

TEST_CASE("tagging is deterministic and always yields valid spans") {
  TaggerModel model = tiny_model();
  const std::vector<std::string> tokens = {"aaw0", "aaw1", "aaw2", "aaw5"};
  auto t1 = model.tag(tokens, "aa");
  auto t2 = model.tag(tokens, "aa");
  REQUIRE(t1.labels == t2.labels);
  REQUIRE(t1.spans == t2.spans);
  REQUIRE(t1.labels.size() == tokens.size());
  for (const auto& sp : t1.spans) {
    REQUIRE(sp.start >= 0);
    REQUIRE(sp.end < static_cast<int>(tokens.size()));
    REQUIRE(sp.start <= sp.end);
  }
}

TEST_CASE("checkpoints round-trip the model exactly") {
  tatest::TmpDir tmp("ckpt");
  TaggerModel model = tiny_model(4, 3, 99);
  model.space("bb").set_alignment(Tensor::from({4, 4}, {0, 1, 0, 0, 1, 0, 0, 0,
                                                        0, 0, 1, 0, 0, 0, 0, 1}));
  const std::vector<std::string> tokens = {"aaw0", "aaw4", "aaw2"};
  auto before = model.tag(tokens, "aa");

  const auto path = tmp.file("m.ckpt");
  model.save(path);
  TaggerModel loaded = TaggerModel::load(path);

  auto after = loaded.tag(tokens, "aa");
  REQUIRE(after.labels == before.labels);

  auto pa = model.all_params();
  auto pb = loaded.all_params();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    REQUIRE(pa[i].name == pb[i].name);
    REQUIRE(pa[i].value.data() == pb[i].value.data());
  }
  REQUIRE(loaded.space("bb").alignment.has_value());
  REQUIRE(loaded.space("bb").alignment->data() == model.space("bb").alignment->data());
  REQUIRE(loaded.languages() == model.languages());

  // The sidecar manifest lists every stored tensor.
  const std::string manifest = tatest::slurp(path + ".manifest");
  REQUIRE(manifest.find("fx.w\t4x4") != std::string::npos);
  REQUIRE(manifest.find("crf.trans\t9x9") != std::string::npos);
  REQUIRE(manifest.find("emb.aa") != std::string::npos);
}

TEST_CASE("export_embeddings writes one row per token matching F(x)") {
  tatest::TmpDir tmp("export");
  TaggerModel model = tiny_model();
  const auto path = tmp.file("f.tsv");
  export_embeddings(model, {{"aa", {"aaw0", "aaw1", "aaw2"}}}, path);

  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  REQUIRE(header.rfind("lang\ttoken\tf0\t", 0) == 0);
  int rows = 0;
  std::string line;
  Tensor f = model.feature_extract({"aaw0", "aaw1", "aaw2"}, "aa");
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::string lang, token;
    ss >> lang >> token;
    REQUIRE(lang == "aa");
    for (int j = 0; j < model.dim(); ++j) {
      double v;
      ss >> v;
      REQUIRE(v == Approx(f.at(rows, j)).margin(1e-9));
    }
    ++rows;
  }
  REQUIRE(rows == 3);

  // Exports differ once parameters change.
  model.feature_extractor().weight().data()[0] += 0.5;
  const auto path2 = tmp.file("f2.tsv");
  export_embeddings(model, {{"aa", {"aaw0", "aaw1", "aaw2"}}}, path2);
  REQUIRE(tatest::slurp(path) != tatest::slurp(path2));
}

TEST_CASE("model construction rejects mismatched dimensionalities") {
  ModelInit init;
  init.seed = 1;
  REQUIRE_THROWS_AS(TaggerModel({tiny_space("aa", 4, 1), tiny_space("bb", 5, 2)}, init),
                    ConfigError);
}
