// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <cstdlib>
#include <functional>
#include <string>
#include <thread>
#include <vector>

namespace hyperflow {

inline int default_workers() {
  if (const char* env = std::getenv("HYPERFLOW_WORKERS")) {
    int n = std::atoi(env);
    if (n >= 1) return n;
  }
  unsigned hc = std::thread::hardware_concurrency();
  return hc ? int(hc) : 1;
}

// Runs fn(begin, end) over [0, n) split into fixed-size chunks. Chunk
// boundaries depend only on (n, chunk), never on the worker count, so any
// chunk-indexed reduction combines in the same order regardless of
// --workers. fn must write to disjoint state per chunk.
template <typename Fn>
void parallel_chunks(std::size_t n, std::size_t chunk, int workers, Fn&& fn) {
  if (n == 0) return;
  if (chunk == 0) chunk = 1;
  std::size_t n_chunks = (n + chunk - 1) / chunk;
  if (workers <= 1 || n_chunks == 1) {
    for (std::size_t c = 0; c < n_chunks; ++c)
      fn(c * chunk, std::min(n, (c + 1) * chunk));
    return;
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      std::size_t c = next.fetch_add(1);
      if (c >= n_chunks) return;
      fn(c * chunk, std::min(n, (c + 1) * chunk));
    }
  };
  std::size_t n_threads = std::min<std::size_t>(std::size_t(workers), n_chunks);
  std::vector<std::thread> pool;
  pool.reserve(n_threads);
  for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
}

}  // namespace hyperflow
