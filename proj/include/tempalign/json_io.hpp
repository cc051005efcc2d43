#pragma once

#include <fstream>
#include <string>

#include <json.hpp>

#include "tempalign/scoring.hpp"
#include "tempalign/training.hpp"

// JSON shapes for the machine-readable outputs: span predictions, score
// reports, and the per-epoch training log (JSON lines). Key order is fixed
// so identical runs produce byte-identical files.

namespace tempalign {

using OrderedJson = nlohmann::ordered_json;

inline OrderedJson span_json(const TimexSpan& s) {
  return OrderedJson{{"start", s.start}, {"end", s.end}, {"type", timex_type_name(s.type)}};
}

inline TimexSpan span_from_json(const OrderedJson& j) {
  if (!j.contains("start") || !j.contains("end") || !j.contains("type"))
    throw FormatError("span object needs start, end and type");
  TimexSpan s;
  s.start = j.at("start").get<int>();
  s.end = j.at("end").get<int>();
  s.type = timex_type_from_name(j.at("type").get<std::string>());
  return s;
}

struct SentencePrediction {
  int index = 0;
  std::string doc_id;
  std::vector<TimexSpan> spans;
};

inline void write_predictions(const std::string& language,
                              const std::vector<SentencePrediction>& sentences,
                              const std::string& path) {
  OrderedJson root;
  root["language"] = language;
  root["sentences"] = OrderedJson::array();
  for (const auto& s : sentences) {
    OrderedJson js;
    js["index"] = s.index;
    js["doc"] = s.doc_id;
    js["spans"] = OrderedJson::array();
    for (const auto& sp : s.spans) js["spans"].push_back(span_json(sp));
    root["sentences"].push_back(std::move(js));
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write predictions: " + path);
  out << root.dump(2) << "\n";
  if (!out) throw IoError("failed writing " + path);
}

inline std::vector<SentencePrediction> read_predictions(const std::string& path,
                                                        std::string* language = nullptr) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open predictions: " + path);
  OrderedJson root;
  try {
    in >> root;
  } catch (const std::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
  if (!root.contains("sentences")) throw FormatError(path + ": missing 'sentences'");
  if (language && root.contains("language")) *language = root.at("language").get<std::string>();
  std::vector<SentencePrediction> out;
  for (const auto& js : root.at("sentences")) {
    SentencePrediction s;
    s.index = js.at("index").get<int>();
    s.doc_id = js.value("doc", "");
    for (const auto& sp : js.at("spans")) s.spans.push_back(span_from_json(sp));
    out.push_back(std::move(s));
  }
  return out;
}

// Predicted spans re-keyed onto the gold corpus's documents; prediction
// sentence order must match the corpus.
inline DocumentSpans prediction_document_spans(const Corpus& gold,
                                               const std::vector<SentencePrediction>& preds) {
  if (preds.size() != gold.sentences.size())
    throw DataError("predictions cover " + std::to_string(preds.size()) + " sentences, corpus has " +
                    std::to_string(gold.sentences.size()));
  DocumentSpans docs;
  std::map<std::string, int> offsets;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto& sent = gold.sentences[i];
    if (!preds[i].doc_id.empty() && preds[i].doc_id != sent.doc_id)
      throw DataError("prediction " + std::to_string(i) + " names document '" + preds[i].doc_id +
                      "', corpus has '" + sent.doc_id + "'");
    auto& off = offsets[sent.doc_id];
    auto& spans = docs[sent.doc_id];
    for (auto sp : preds[i].spans) {
      if (sp.start < 0 || sp.end < sp.start || sp.end >= static_cast<int>(sent.tokens.size()))
        throw DataError("prediction " + std::to_string(i) + ": span out of sentence range");
      sp.start += off;
      sp.end += off;
      spans.push_back(sp);
    }
    off += static_cast<int>(sent.tokens.size());
  }
  // Documents with no predicted spans still participate in scoring.
  for (const auto& sent : gold.sentences) docs.try_emplace(sent.doc_id);
  return docs;
}

inline OrderedJson prf_json(const Prf& p) {
  return OrderedJson{{"precision", p.precision}, {"recall", p.recall}, {"f1", p.f1}};
}

inline OrderedJson score_report_json(const ScoreReport& r) {
  OrderedJson j;
  j["strict"] = prf_json(r.strict);
  j["relaxed"] = prf_json(r.relaxed);
  j["type_f1"] = r.type_f1;
  j["type_f1_weighted"] = r.type_f1_weighted;
  j["counts"] = OrderedJson{{"gold", r.gold_count},
                            {"pred", r.pred_count},
                            {"strict_matches", r.strict_matches},
                            {"relaxed_matches", r.relaxed_matches},
                            {"type_matches", r.type_matches}};
  return j;
}

inline OrderedJson dev_triple_json(const ScoreReport& r) {
  return OrderedJson{{"strict", r.strict.f1}, {"relaxed", r.relaxed.f1}, {"type", r.type_f1}};
}

inline OrderedJson epoch_record_json(const EpochRecord& rec) {
  OrderedJson j;
  j["epoch"] = rec.epoch;
  j["loss_c"] = rec.loss_c;
  j["loss_d"] = rec.loss_d;
  j["disc_acc"] = rec.disc_acc;
  j["dev"] = OrderedJson::object();
  for (const auto& [lang, report] : rec.dev) j["dev"][lang] = dev_triple_json(report);
  j["combined"] = dev_triple_json(rec.combined);
  return j;
}

inline void write_training_log(const std::vector<EpochRecord>& log, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write training log: " + path);
  for (const auto& rec : log) out << epoch_record_json(rec).dump() << "\n";
  if (!out) throw IoError("failed writing " + path);
}

}  // namespace tempalign
