#pragma once

#include <algorithm>
#include <thread>
#include <vector>

namespace dsafe {

/// Runs fn(i) for i in [0, count). Each index must write only to its own
/// output slots; results are then identical for every thread count.
template <typename Fn>
void parallel_for_index(int count, int threads, const Fn& fn) {
  if (threads <= 1 || count <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  const int workers = std::min(threads, count);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      for (int i = w; i < count; i += workers) fn(i);
    });
  for (auto& t : pool) t.join();
}

}  // namespace dsafe
