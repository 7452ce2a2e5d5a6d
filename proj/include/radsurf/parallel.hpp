#pragma once

// Deterministic parallel loops. Work is split into fixed-size chunks whose
// boundaries depend only on the problem size, never on the thread count, so
// per-chunk results can be reduced in chunk order and reproduce bit-identical
// totals on any machine.

#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

namespace radsurf {

inline int hardware_threads() {
    unsigned n = std::thread::hardware_concurrency();
    return n == 0 ? 1 : static_cast<int>(n);
}

// 0 means "all hardware threads". Explicit requests are honored even above
// the core count (oversubscription is slower but legal; reproducibility tests
// rely on running the same work under different thread counts).
inline int clamp_threads(int requested) {
    if (requested <= 0) return hardware_threads();
    return requested < 256 ? requested : 256;
}

// Invokes fn(chunk_index, begin, end) for every chunk of [0, n). Chunks are
// claimed dynamically but their extents are fixed, so fn must only write to
// chunk-local state indexed by chunk_index.
template <class Fn>
void parallel_chunks(std::size_t n, std::size_t chunk_size, int threads, Fn&& fn) {
    if (n == 0) return;
    if (chunk_size == 0) chunk_size = 1;
    const std::size_t num_chunks = (n + chunk_size - 1) / chunk_size;
    threads = clamp_threads(threads);
    if (threads <= 1 || num_chunks == 1) {
        for (std::size_t c = 0; c < num_chunks; ++c) {
            std::size_t begin = c * chunk_size;
            std::size_t end = begin + chunk_size < n ? begin + chunk_size : n;
            fn(c, begin, end);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            std::size_t c = next.fetch_add(1, std::memory_order_relaxed);
            if (c >= num_chunks) return;
            std::size_t begin = c * chunk_size;
            std::size_t end = begin + chunk_size < n ? begin + chunk_size : n;
            fn(c, begin, end);
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads) - 1);
    for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
}

// Deterministic sum reduction: per-chunk partial sums are combined serially in
// chunk order. fn(index) -> double.
template <class Fn>
double parallel_sum(std::size_t n, std::size_t chunk_size, int threads, Fn&& fn) {
    if (n == 0) return 0.0;
    if (chunk_size == 0) chunk_size = 1;
    const std::size_t num_chunks = (n + chunk_size - 1) / chunk_size;
    std::vector<double> partial(num_chunks, 0.0);
    parallel_chunks(n, chunk_size, threads, [&](std::size_t c, std::size_t b, std::size_t e) {
        double acc = 0.0;
        for (std::size_t i = b; i < e; ++i) acc += fn(i);
        partial[c] = acc;
    });
    double total = 0.0;
    for (double p : partial) total += p;
    return total;
}

}  // namespace radsurf
