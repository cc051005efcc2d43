#pragma once

#include <cmath>
#include <vector>

#include "tempalign/crf.hpp"

// Exhaustive CRF oracle: enumerates all |L|^n label paths to get the exact
// log-partition, best path and total path probability. Independent of the
// forward-algorithm and Viterbi implementations it checks.

namespace tatest {

struct BruteForce {
  double log_z = 0.0;
  std::vector<int> best_path;
  double best_score = 0.0;
  double prob_sum = 0.0;  // sum over paths of exp(score - logZ)
};

inline BruteForce enumerate_paths(tempalign::CrfLayer& crf, const tempalign::Tensor& emissions) {
  const int n = emissions.rows(), L = crf.num_labels();
  std::vector<int> path(static_cast<std::size_t>(n), 0);
  std::vector<double> scores;
  std::vector<std::vector<int>> paths;
  while (true) {
    scores.push_back(crf.path_score(emissions, path).value());
    paths.push_back(path);
    int pos = n - 1;
    while (pos >= 0 && ++path[static_cast<std::size_t>(pos)] == L) {
      path[static_cast<std::size_t>(pos)] = 0;
      --pos;
    }
    if (pos < 0) break;
  }
  double mx = scores[0];
  for (double s : scores) mx = std::max(mx, s);
  double acc = 0.0;
  for (double s : scores) acc += std::exp(s - mx);
  BruteForce out;
  out.log_z = mx + std::log(acc);
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i)
    if (scores[i] > scores[best]) best = i;  // first maximum = lexicographically smallest path
  out.best_path = paths[best];
  out.best_score = scores[best];
  for (double s : scores) out.prob_sum += std::exp(s - out.log_z);
  return out;
}

}  // namespace tatest
