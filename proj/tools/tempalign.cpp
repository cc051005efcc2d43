// tempalign command-line tool: alignment fitting, model training, tagging,
// scoring, significance testing, feature export and corpus statistics.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tempalign/tempalign.hpp"

namespace ta = tempalign;
namespace fs = std::filesystem;

namespace {

int run_align(const std::string& method, const std::string& src_lang, const std::string& tgt_lang,
              const std::string& src_vec, const std::string& tgt_vec, const std::string& dict_path,
              int k, const std::string& out_path) {
  ta::EmbeddingSpace src = ta::load_vectors(src_vec, src_lang);
  ta::EmbeddingSpace tgt = ta::load_vectors(tgt_vec, tgt_lang);
  ta::BilingualDictionary dict;
  if (method == "string-match") {
    dict = ta::build_dictionary_string_match(src, tgt, k);
  } else {
    if (dict_path.empty()) throw ta::ConfigError("--dict is required with --method dictionary");
    dict = ta::load_dictionary(dict_path, src, tgt);
  }
  ta::AlignmentMatrix a = ta::procrustes_align(src, tgt, dict);
  ta::save_alignment(a, out_path);
  std::printf("dictionary pairs: %zu\n", dict.size());
  std::printf("residual |XA - Y|_F: %.6f\n", ta::alignment_residual(a, src, tgt, dict));
  std::printf("orthogonality |A^T A - I|_max: %.3e\n", ta::max_orthogonality_error(a.matrix));
  std::printf("wrote %s\n", out_path.c_str());
  return 0;
}

std::vector<std::uint64_t> parse_seeds(const std::string& s) {
  std::vector<std::uint64_t> seeds;
  std::string cur;
  for (char c : s + ",") {
    if (c == ',') {
      if (!cur.empty()) {
        seeds.push_back(std::stoull(cur));
        cur.clear();
      }
    } else if (c >= '0' && c <= '9') {
      cur += c;
    } else {
      throw ta::ParameterError("--seeds: expected comma-separated integers, got '" + s + "'");
    }
  }
  return seeds;
}

std::vector<ta::EmbeddingSpace> clone_spaces(const std::vector<ta::EmbeddingSpace>& spaces) {
  std::vector<ta::EmbeddingSpace> out;
  for (const auto& sp : spaces) {
    ta::EmbeddingSpace c = sp;
    c.vectors = sp.vectors.clone();
    if (sp.alignment) c.set_alignment(sp.alignment->clone());
    out.push_back(std::move(c));
  }
  return out;
}

int run_train(const std::string& config_path, const std::string& seeds_arg,
              const std::string& out_dir) {
  ta::TrainConfig cfg = ta::validate_config(config_path);
  std::vector<std::uint64_t> seeds =
      seeds_arg.empty() ? std::vector<std::uint64_t>{cfg.seed} : parse_seeds(seeds_arg);
  if (seeds.empty()) throw ta::ParameterError("--seeds: no seeds given");

  fs::create_directories(out_dir);
  ta::TrainData data = ta::load_train_data(cfg);
  std::vector<ta::EmbeddingSpace> spaces = ta::load_spaces(cfg);

  std::vector<std::string> checkpoints;
  auto result = ta::multi_seed_run(seeds, [&](std::uint64_t seed) {
    ta::TrainConfig scfg = cfg;
    scfg.seed = seed;
    ta::Trainer trainer(scfg, data, clone_spaces(spaces));
    ta::TrainResult r = trainer.train();
    const std::string stem = (fs::path(out_dir) / ("seed" + std::to_string(seed))).string();
    trainer.model().save(stem + ".ckpt");
    ta::write_training_log(r.log, stem + ".log.jsonl");
    checkpoints.push_back(stem + ".ckpt");
    std::printf("seed %llu: best epoch %d, dev relaxed F1 %.4f\n",
                static_cast<unsigned long long>(seed), r.best_epoch, r.best_dev_relaxed_f1);
    return r;
  });

  ta::OrderedJson summary;
  summary["seeds"] = ta::OrderedJson::array();
  summary["dev_relaxed_f1"] = ta::OrderedJson::array();
  for (const auto& run : result.runs) {
    summary["seeds"].push_back(run.seed);
    summary["dev_relaxed_f1"].push_back(run.result.best_dev_relaxed_f1);
  }
  summary["selected_seed"] = result.runs[result.selected].seed;
  summary["selected_checkpoint"] = checkpoints[result.selected];
  const std::string summary_path = (fs::path(out_dir) / "summary.json").string();
  std::ofstream out(summary_path);
  if (!out) throw ta::IoError("cannot write " + summary_path);
  out << summary.dump(2) << "\n";
  std::printf("median run: seed %llu (%s)\n",
              static_cast<unsigned long long>(result.runs[result.selected].seed),
              checkpoints[result.selected].c_str());
  return 0;
}

int run_tag(const std::string& model_path, const std::string& input_path, std::string lang,
            const std::string& out_path) {
  ta::TaggerModel model = ta::TaggerModel::load(model_path);
  ta::Corpus corpus = ta::load_labeled(input_path);
  if (lang.empty()) lang = corpus.language;
  else if (lang != corpus.language)
    throw ta::ConfigError("--lang " + lang + " disagrees with corpus language " + corpus.language);
  std::vector<ta::SentencePrediction> preds(corpus.sentences.size());
  ta::parallel_for(corpus.sentences.size(), ta::eval_threads(), [&](std::size_t i) {
    preds[i] = {static_cast<int>(i), corpus.sentences[i].doc_id,
                model.tag(corpus.sentences[i].tokens, lang).spans};
  });
  ta::write_predictions(lang, preds, out_path);
  std::size_t n_spans = 0;
  for (const auto& p : preds) n_spans += p.spans.size();
  std::printf("tagged %zu sentences, %zu spans -> %s\n", corpus.sentences.size(), n_spans,
              out_path.c_str());
  return 0;
}

void print_report(const ta::ScoreReport& r, bool weighted_type) {
  std::printf("%-8s %9s %9s %9s\n", "", "P", "R", "F1");
  std::printf("%-8s %9.4f %9.4f %9.4f\n", "strict", r.strict.precision, r.strict.recall,
              r.strict.f1);
  std::printf("%-8s %9.4f %9.4f %9.4f\n", "relaxed", r.relaxed.precision, r.relaxed.recall,
              r.relaxed.f1);
  std::printf("type F1: %.4f%s\n", weighted_type ? r.type_f1_weighted : r.type_f1,
              weighted_type ? " (attribute-weighted)" : "");
  std::printf("counts: gold=%zu pred=%zu strict=%zu relaxed=%zu type=%zu\n", r.gold_count,
              r.pred_count, r.strict_matches, r.relaxed_matches, r.type_matches);
}

int run_evaluate(const std::string& gold_path, const std::string& pred_path, bool json_only,
                 bool weighted_type) {
  ta::Corpus gold = ta::load_labeled(gold_path);
  auto preds = ta::read_predictions(pred_path);
  ta::ScoreReport r = ta::score(ta::document_spans(gold), ta::prediction_document_spans(gold, preds));
  if (json_only) {
    std::cout << ta::score_report_json(r).dump(2) << "\n";
  } else {
    print_report(r, weighted_type);
  }
  return 0;
}

int run_significance(const std::string& gold_path, const std::string& pred_a,
                     const std::string& pred_b, const std::string& metric_name, int iterations,
                     std::uint64_t seed) {
  ta::Corpus gold = ta::load_labeled(gold_path);
  const ta::DocumentSpans gold_docs = ta::document_spans(gold);
  const ta::Metric metric = ta::metric_from_name(metric_name);
  auto a = ta::per_document_metric(gold_docs,
                                   ta::prediction_document_spans(gold, ta::read_predictions(pred_a)),
                                   metric);
  auto b = ta::per_document_metric(gold_docs,
                                   ta::prediction_document_spans(gold, ta::read_predictions(pred_b)),
                                   metric);
  const double p = ta::paired_permutation_test(a, b, iterations, seed);
  std::printf("metric: %s over %zu documents\n", metric_name.c_str(), a.size());
  std::printf("p-value: %.6f\n", p);
  std::printf("significant at alpha=0.05: %s\n", p < 0.05 ? "yes" : "no");
  return 0;
}

int run_export(const std::string& model_path, const std::string& input_path,
               const std::string& out_path) {
  ta::TaggerModel model = ta::TaggerModel::load(model_path);
  ta::Corpus corpus = ta::load_labeled(input_path);
  std::vector<std::pair<std::string, std::vector<std::string>>> sentences;
  for (const auto& s : corpus.sentences) sentences.emplace_back(corpus.language, s.tokens);
  ta::export_embeddings(model, sentences, out_path);
  std::printf("exported features for %zu sentences -> %s\n", sentences.size(), out_path.c_str());
  return 0;
}

int run_stats(const std::string& input_path) {
  ta::Corpus corpus = ta::load_labeled(input_path);
  const ta::CorpusStats s = ta::corpus_stats(corpus);
  std::printf("%zu / %zu\n", s.sentences, s.expressions);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tempalign: multilingual temporal-expression tagging toolkit"};
  app.require_subcommand(1);

  // align
  auto* align = app.add_subcommand("align", "Fit an orthogonal alignment matrix into the pivot space");
  std::string al_method = "string-match", al_src, al_tgt = "en", al_src_vec, al_tgt_vec, al_dict,
              al_out;
  int al_k = 5000;
  align->add_option("--method", al_method, "string-match or dictionary")
      ->check(CLI::IsMember({"string-match", "dictionary"}));
  align->add_option("--src", al_src, "source language code")->required();
  align->add_option("--tgt", al_tgt, "pivot language code");
  align->add_option("--src-vectors", al_src_vec, "source word-vector file")->required();
  align->add_option("--tgt-vectors", al_tgt_vec, "pivot word-vector file")->required();
  align->add_option("--dict", al_dict, "bilingual dictionary TSV (dictionary method)");
  align->add_option("--k", al_k, "vocabulary cap per language");
  align->add_option("--out", al_out, "output alignment matrix file")->required();

  // train
  auto* train = app.add_subcommand("train", "Train the multilingual tagger");
  std::string tr_config, tr_seeds, tr_out_dir = ".";
  train->add_option("--config", tr_config, "key=value config file")->required();
  train->add_option("--seeds", tr_seeds, "comma-separated seeds; median run is selected");
  train->add_option("--out-dir", tr_out_dir, "directory for checkpoints and logs");

  // tag
  auto* tag = app.add_subcommand("tag", "Tag a corpus with a trained model");
  std::string tg_model, tg_input, tg_lang, tg_out;
  tag->add_option("--model", tg_model, "model checkpoint")->required();
  tag->add_option("--input", tg_input, "corpus file")->required();
  tag->add_option("--lang", tg_lang, "language code (defaults to the corpus header)");
  tag->add_option("--out", tg_out, "output spans JSON")->required();

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Score predictions against a gold corpus");
  std::string ev_gold, ev_pred;
  bool ev_json = false, ev_weighted = false;
  evaluate->add_option("--gold", ev_gold, "gold corpus file")->required();
  evaluate->add_option("--pred", ev_pred, "predicted spans JSON")->required();
  evaluate->add_flag("--json", ev_json, "machine-readable JSON only");
  evaluate->add_flag("--type-weighted", ev_weighted,
                     "report the attribute-weighted type F1 variant");

  // significance
  auto* sig = app.add_subcommand("significance", "Paired permutation test between two systems");
  std::string sg_gold, sg_a, sg_b, sg_metric = "relaxed";
  int sg_iterations = 10000;
  std::uint64_t sg_seed = 0;
  sig->add_option("--gold", sg_gold, "gold corpus file")->required();
  sig->add_option("--predA", sg_a, "system A spans JSON")->required();
  sig->add_option("--predB", sg_b, "system B spans JSON")->required();
  sig->add_option("--metric", sg_metric, "strict, relaxed or type")
      ->check(CLI::IsMember({"strict", "relaxed", "type"}));
  sig->add_option("--iterations", sg_iterations, "Monte-Carlo iterations");
  sig->add_option("--seed", sg_seed, "permutation seed");

  // export-embeddings
  auto* exp = app.add_subcommand("export-embeddings",
                                 "Write per-token feature-extractor outputs as TSV");
  std::string ex_model, ex_input, ex_out;
  exp->add_option("--model", ex_model, "model checkpoint")->required();
  exp->add_option("--input", ex_input, "corpus file")->required();
  exp->add_option("--out", ex_out, "output TSV")->required();

  // stats
  auto* stats = app.add_subcommand("stats", "Corpus statistics: sentences / temporal expressions");
  std::string st_input;
  stats->add_option("--input", st_input, "corpus file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*align) return run_align(al_method, al_src, al_tgt, al_src_vec, al_tgt_vec, al_dict, al_k, al_out);
    if (*train) return run_train(tr_config, tr_seeds, tr_out_dir);
    if (*tag) return run_tag(tg_model, tg_input, tg_lang, tg_out);
    if (*evaluate) return run_evaluate(ev_gold, ev_pred, ev_json, ev_weighted);
    if (*sig) return run_significance(sg_gold, sg_a, sg_b, sg_metric, sg_iterations, sg_seed);
    if (*exp) return run_export(ex_model, ex_input, ex_out);
    if (*stats) return run_stats(st_input);
  } catch (const ta::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const ta::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const ta::ParameterError& e) {
    std::cerr << "parameter error: " << e.what() << "\n";
    return 1;
  } catch (const ta::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
