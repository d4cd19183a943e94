#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace drgrl {

// Runs fn(i) for i in [0, n) on up to `threads` workers with a fixed strided
// assignment. Callers write results into per-index slots, so the outcome does
// not depend on the thread count.
template <typename Fn>
void ParallelFor(std::size_t n, int threads, Fn&& fn) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) fn(i);
    });
  }
}

}  // namespace drgrl
