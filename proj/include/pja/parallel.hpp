#pragma once

#include <atomic>
#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace pja {

inline unsigned resolve_workers(unsigned requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("PJA_WORKERS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<unsigned>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? hw : 1;
}

// Runs fn(chunk_index, begin, end) over fixed-size chunks pulled from an atomic
// counter.  Chunk boundaries do not depend on the worker count, so any reduction
// stored per chunk and combined in chunk order is bit-reproducible.
template <class Fn>
void parallel_chunks(std::size_t n, std::size_t chunk, Fn fn, unsigned workers = 0) {
  if (n == 0) return;
  const std::size_t n_chunks = (n + chunk - 1) / chunk;
  const unsigned w = std::min<std::size_t>(resolve_workers(workers), n_chunks);
  if (w <= 1) {
    for (std::size_t c = 0; c < n_chunks; ++c) fn(c, c * chunk, std::min(n, (c + 1) * chunk));
    return;
  }
  std::atomic<std::size_t> next{0};
  auto body = [&] {
    for (;;) {
      const std::size_t c = next.fetch_add(1);
      if (c >= n_chunks) return;
      fn(c, c * chunk, std::min(n, (c + 1) * chunk));
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(w - 1);
  for (unsigned t = 0; t + 1 < w; ++t) pool.emplace_back(body);
  body();
  for (auto& th : pool) th.join();
}

// Deterministic parallel sum: per-chunk partials combined in index order.
template <class Fn>
double parallel_sum(std::size_t n, std::size_t chunk, Fn term, unsigned workers = 0) {
  const std::size_t n_chunks = n == 0 ? 0 : (n + chunk - 1) / chunk;
  std::vector<double> partial(n_chunks, 0.0);
  parallel_chunks(
      n, chunk,
      [&](std::size_t c, std::size_t i0, std::size_t i1) {
        double s = 0.0;
        for (std::size_t i = i0; i < i1; ++i) s += term(i);
        partial[c] = s;
      },
      workers);
  double total = 0.0;
  for (double s : partial) total += s;
  return total;
}

}  // namespace pja
