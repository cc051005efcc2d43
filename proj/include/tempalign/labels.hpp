#pragma once

#include <array>
#include <string>
#include <vector>

#include "tempalign/errors.hpp"

namespace tempalign {

enum class TimexType { Date, Time, Duration, Set };

constexpr int kNumTimexTypes = 4;

inline const char* timex_type_name(TimexType t) {
  switch (t) {
    case TimexType::Date: return "DATE";
    case TimexType::Time: return "TIME";
    case TimexType::Duration: return "DURATION";
    case TimexType::Set: return "SET";
  }
  return "?";
}

inline TimexType timex_type_from_name(const std::string& s) {
  if (s == "DATE") return TimexType::Date;
  if (s == "TIME") return TimexType::Time;
  if (s == "DURATION") return TimexType::Duration;
  if (s == "SET") return TimexType::Set;
  throw DataError("unknown temporal type: '" + s + "'");
}

// The fixed 9-label IOB2 scheme: O plus B-/I- for each of the four temporal
// types. Index 0 is O; type t occupies indices 1+2t (B) and 2+2t (I).
class LabelScheme {
 public:
  static constexpr int kOutside = 0;
  static constexpr int kNumLabels = 9;

  static int b_label(TimexType t) { return 1 + 2 * static_cast<int>(t); }
  static int i_label(TimexType t) { return 2 + 2 * static_cast<int>(t); }

  static bool is_b(int label) { return label > 0 && label % 2 == 1; }
  static bool is_i(int label) { return label > 0 && label % 2 == 0; }
  static TimexType type_of(int label) {
    if (label <= 0 || label >= kNumLabels) throw DataError("label index has no type: " + std::to_string(label));
    return static_cast<TimexType>((label - 1) / 2);
  }

  static const std::string& name(int label) {
    static const std::array<std::string, kNumLabels> names = {
        "O",      "B-DATE",     "I-DATE",     "B-TIME", "I-TIME",
        "B-DURATION", "I-DURATION", "B-SET",  "I-SET"};
    if (label < 0 || label >= kNumLabels) throw DataError("label index out of range: " + std::to_string(label));
    return names[static_cast<std::size_t>(label)];
  }

  static int index(const std::string& name_) {
    for (int i = 0; i < kNumLabels; ++i)
      if (name(i) == name_) return i;
    throw DataError("unknown label: '" + name_ + "'");
  }

  static std::vector<std::string> all_names() {
    std::vector<std::string> out;
    for (int i = 0; i < kNumLabels; ++i) out.push_back(name(i));
    return out;
  }

  // IOB2 validity: an I-X may only follow B-X or I-X.
  static bool valid_sequence(const std::vector<int>& labels) {
    int prev = kOutside;
    for (int l : labels) {
      if (l < 0 || l >= kNumLabels) return false;
      if (is_i(l)) {
        if (prev == kOutside || type_of(prev) != type_of(l)) return false;
      }
      prev = l;
    }
    return true;
  }
};

}  // namespace tempalign
