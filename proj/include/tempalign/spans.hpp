#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "tempalign/labels.hpp"

namespace tempalign {

// One temporal expression: an inclusive token range with a type.
struct TimexSpan {
  int start = 0;
  int end = 0;  // inclusive
  TimexType type = TimexType::Date;

  bool operator==(const TimexSpan&) const = default;
};

inline bool spans_overlap(const TimexSpan& a, const TimexSpan& b) {
  return a.start <= b.end && b.start <= a.end;
}

// Decodes an IOB2 label sequence into spans. Maximal B-X (I-X)* runs become
// spans; an I-X without a valid predecessor is repaired to B-X, so any label
// sequence decodes.
inline std::vector<TimexSpan> iob2_to_spans(const std::vector<int>& labels) {
  std::vector<TimexSpan> spans;
  int open_start = -1;
  TimexType open_type = TimexType::Date;
  auto close = [&](int end) {
    if (open_start >= 0) spans.push_back({open_start, end, open_type});
    open_start = -1;
  };
  for (std::size_t t = 0; t < labels.size(); ++t) {
    const int l = labels[t];
    if (l < 0 || l >= LabelScheme::kNumLabels)
      throw DataError("label index out of range: " + std::to_string(l));
    if (l == LabelScheme::kOutside) {
      close(static_cast<int>(t) - 1);
    } else if (LabelScheme::is_b(l)) {
      close(static_cast<int>(t) - 1);
      open_start = static_cast<int>(t);
      open_type = LabelScheme::type_of(l);
    } else {  // I-X: continues a span of the same type, otherwise repaired to B-X
      if (open_start < 0 || open_type != LabelScheme::type_of(l)) {
        close(static_cast<int>(t) - 1);
        open_start = static_cast<int>(t);
        open_type = LabelScheme::type_of(l);
      }
    }
  }
  close(static_cast<int>(labels.size()) - 1);
  return spans;
}

inline std::vector<TimexSpan> iob2_to_spans(const std::vector<std::string>& labels) {
  std::vector<int> idx;
  idx.reserve(labels.size());
  for (const auto& l : labels) idx.push_back(LabelScheme::index(l));
  return iob2_to_spans(idx);
}

// Inverse encoding; spans must be in-range and non-overlapping.
inline std::vector<int> spans_to_iob2(std::vector<TimexSpan> spans, int length) {
  std::sort(spans.begin(), spans.end(),
            [](const TimexSpan& a, const TimexSpan& b) { return a.start < b.start; });
  std::vector<int> labels(static_cast<std::size_t>(length), LabelScheme::kOutside);
  int prev_end = -1;
  for (const auto& sp : spans) {
    if (sp.start < 0 || sp.end < sp.start || sp.end >= length)
      throw DataError("span [" + std::to_string(sp.start) + "," + std::to_string(sp.end) +
                      "] out of range for length " + std::to_string(length));
    if (sp.start <= prev_end)
      throw DataError("overlapping spans at token " + std::to_string(sp.start));
    prev_end = sp.end;
    labels[static_cast<std::size_t>(sp.start)] = LabelScheme::b_label(sp.type);
    for (int t = sp.start + 1; t <= sp.end; ++t)
      labels[static_cast<std::size_t>(t)] = LabelScheme::i_label(sp.type);
  }
  return labels;
}

}  // namespace tempalign
