#pragma once

#include <atomic>
#include <cstdlib>
#include <thread>
#include <vector>

namespace tempalign {

// Evaluation parallelism cap; TEMPALIGN_THREADS overrides, default 1.
inline int eval_threads() {
  if (const char* env = std::getenv("TEMPALIGN_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  return 1;
}

// Runs fn(i) for i in [0, n). Work items must be independent; callers store
// results by index so the reduction order stays deterministic.
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn fn) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
  };
  std::vector<std::thread> pool;
  const int count = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
  pool.reserve(static_cast<std::size_t>(count));
  for (int t = 0; t < count; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
}

}  // namespace tempalign
