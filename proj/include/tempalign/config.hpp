#pragma once

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "tempalign/corpus.hpp"
#include "tempalign/embeddings.hpp"

namespace tempalign {

// Training configuration. Scalar defaults follow the published training
// setup; path maps are keyed by language code.
struct TrainConfig {
  double lr = 1e-5;
  int epochs = 50;
  int patience = 5;
  double dropout = 0.1;
  double lambda = 0.001;
  int disc_interval = 10;
  int disc_hidden = 100;
  int lstm_hidden = 128;
  int batch_size = 32;
  std::uint64_t seed = 42;
  double weight_decay = 0.01;
  double grad_clip = 5.0;  // 0 disables
  bool trainable_embeddings = false;
  std::string optimizer = "adamw";  // "sgd" exists for update-rule verification
  int max_vocab = 0;               // cap on loaded vectors per language; 0 = no cap

  std::map<std::string, std::string> train_paths;
  std::map<std::string, std::string> dev_paths;
  std::map<std::string, std::string> unlabeled_paths;
  std::map<std::string, std::string> vector_paths;
  std::map<std::string, std::string> alignment_paths;

  // Languages participating in training, sorted; defines the discriminator
  // inventory.
  std::vector<std::string> languages() const {
    std::set<std::string> langs;
    for (const auto& [l, p] : train_paths) langs.insert(l);
    for (const auto& [l, p] : unlabeled_paths) langs.insert(l);
    return {langs.begin(), langs.end()};
  }
};

namespace detail {

inline bool parse_bool(const std::string& v, bool& out) {
  if (v == "true" || v == "1" || v == "yes") { out = true; return true; }
  if (v == "false" || v == "0" || v == "no") { out = false; return true; }
  return false;
}

}  // namespace detail

// Parses and validates a key=value config file. Absent keys keep their
// defaults; unknown keys, unparsable values, bad ranges and missing files
// are all collected and reported together.
inline TrainConfig validate_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path);

  TrainConfig cfg;
  std::vector<std::string> errors;
  std::string line;
  long line_no = 0;

  auto err = [&](const std::string& msg) {
    errors.push_back(path + ":" + std::to_string(line_no) + ": " + msg);
  };
  auto parse_double_into = [&](const std::string& v, double& out, const std::string& key) {
    double d;
    if (detail::parse_double(v, d)) out = d;
    else err("cannot parse value for " + key + ": '" + v + "'");
  };
  auto parse_int_into = [&](const std::string& v, int& out, const std::string& key) {
    long l;
    if (detail::parse_int(v, l)) out = static_cast<int>(l);
    else err("cannot parse value for " + key + ": '" + v + "'");
  };

  while (std::getline(in, line)) {
    ++line_no;
    std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      err("expected key=value");
      continue;
    }
    const std::string key = detail::trim(t.substr(0, eq));
    const std::string value = detail::trim(t.substr(eq + 1));
    if (key.empty() || value.empty()) {
      err("empty key or value");
      continue;
    }

    auto lang_of = [&](const std::string& prefix) { return key.substr(prefix.size()); };
    if (key.rfind("train.", 0) == 0) cfg.train_paths[lang_of("train.")] = value;
    else if (key.rfind("dev.", 0) == 0) cfg.dev_paths[lang_of("dev.")] = value;
    else if (key.rfind("unlabeled.", 0) == 0) cfg.unlabeled_paths[lang_of("unlabeled.")] = value;
    else if (key.rfind("vectors.", 0) == 0) cfg.vector_paths[lang_of("vectors.")] = value;
    else if (key.rfind("alignment.", 0) == 0) cfg.alignment_paths[lang_of("alignment.")] = value;
    else if (key == "lr") parse_double_into(value, cfg.lr, key);
    else if (key == "epochs") parse_int_into(value, cfg.epochs, key);
    else if (key == "patience") parse_int_into(value, cfg.patience, key);
    else if (key == "dropout") parse_double_into(value, cfg.dropout, key);
    else if (key == "lambda") parse_double_into(value, cfg.lambda, key);
    else if (key == "disc_interval") parse_int_into(value, cfg.disc_interval, key);
    else if (key == "disc_hidden") parse_int_into(value, cfg.disc_hidden, key);
    else if (key == "lstm_hidden") parse_int_into(value, cfg.lstm_hidden, key);
    else if (key == "batch_size") parse_int_into(value, cfg.batch_size, key);
    else if (key == "weight_decay") parse_double_into(value, cfg.weight_decay, key);
    else if (key == "grad_clip") parse_double_into(value, cfg.grad_clip, key);
    else if (key == "max_vocab") parse_int_into(value, cfg.max_vocab, key);
    else if (key == "seed") {
      long l;
      if (detail::parse_int(value, l) && l >= 0) cfg.seed = static_cast<std::uint64_t>(l);
      else err("cannot parse value for seed: '" + value + "'");
    } else if (key == "trainable_embeddings") {
      if (!detail::parse_bool(value, cfg.trainable_embeddings))
        err("cannot parse boolean for trainable_embeddings: '" + value + "'");
    } else if (key == "optimizer") {
      if (value == "adamw" || value == "sgd") cfg.optimizer = value;
      else err("optimizer must be 'adamw' or 'sgd', got '" + value + "'");
    } else {
      err("unknown key '" + key + "'");
    }
  }

  line_no = 0;  // range and cross-key checks are file-level
  auto ferr = [&](const std::string& msg) { errors.push_back(path + ": " + msg); };
  if (cfg.lr <= 0) ferr("lr must be positive");
  if (cfg.epochs < 1) ferr("epochs must be >= 1");
  if (cfg.patience < 1) ferr("patience must be >= 1");
  if (cfg.dropout < 0 || cfg.dropout >= 1) ferr("dropout must be in [0, 1)");
  if (cfg.lambda < 0) ferr("lambda must be >= 0");
  if (cfg.disc_interval < 1) ferr("disc_interval must be >= 1");
  if (cfg.disc_hidden < 1) ferr("disc_hidden must be >= 1");
  if (cfg.lstm_hidden < 1) ferr("lstm_hidden must be >= 1");
  if (cfg.batch_size < 1) ferr("batch_size must be >= 1");
  if (cfg.grad_clip < 0) ferr("grad_clip must be >= 0");
  if (cfg.max_vocab < 0) ferr("max_vocab must be >= 0");

  std::set<std::string> referenced;
  for (const auto& m : {cfg.train_paths, cfg.dev_paths, cfg.unlabeled_paths})
    for (const auto& [l, p] : m) referenced.insert(l);
  for (const auto& l : referenced)
    if (!cfg.vector_paths.count(l)) ferr("missing vectors." + l + " for referenced language");
  for (const auto& [l, p] : cfg.dev_paths)
    if (!cfg.train_paths.count(l) && !cfg.unlabeled_paths.count(l))
      ferr("dev." + l + " names a language not in training");
  for (const auto& m :
       {cfg.train_paths, cfg.dev_paths, cfg.unlabeled_paths, cfg.vector_paths, cfg.alignment_paths})
    for (const auto& [l, p] : m)
      if (!std::filesystem::exists(p)) ferr("file not found: " + p);

  if (!errors.empty()) {
    std::string joined;
    for (const auto& e : errors) joined += (joined.empty() ? "" : "\n") + e;
    throw ConfigError(joined);
  }
  return cfg;
}

}  // namespace tempalign
