#pragma once

#include <atomic>
#include <cstdlib>
#include <thread>
#include <vector>

namespace mfbsde::detail {

inline int thread_count() {
  if (const char* env = std::getenv("MFBSDE_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw > 8 ? 8 : hw);
}

// Runs work(chunk) for chunk = 0..n_chunks-1, possibly on several threads,
// and returns the results indexed by chunk. Callers merge in index order so
// the outcome is independent of the thread count.
template <typename Partial, typename Work>
std::vector<Partial> run_chunks(std::size_t n_chunks, const Work& work) {
  std::vector<Partial> results(n_chunks);
  const int threads = thread_count();
  if (threads <= 1 || n_chunks <= 1) {
    for (std::size_t c = 0; c < n_chunks; ++c) results[c] = work(c);
    return results;
  }
  std::atomic<std::size_t> next{0};
  auto body = [&] {
    for (;;) {
      const std::size_t c = next.fetch_add(1);
      if (c >= n_chunks) break;
      results[c] = work(c);
    }
  };
  std::vector<std::thread> pool;
  const int n_workers = static_cast<int>(n_chunks < static_cast<std::size_t>(threads)
                                             ? n_chunks
                                             : static_cast<std::size_t>(threads));
  pool.reserve(n_workers);
  for (int i = 0; i < n_workers; ++i) pool.emplace_back(body);
  for (auto& th : pool) th.join();
  return results;
}

inline constexpr std::size_t chunk_size = 1024;

}  // namespace mfbsde::detail
