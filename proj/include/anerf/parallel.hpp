#pragma once

#include <atomic>
#include <functional>
#include <thread>
#include <vector>

namespace anerf {

// Run fn(chunk_index) for chunk_index in [0, n_chunks) on `threads` workers.
// Chunk boundaries are independent of the thread count, so any reduction
// done per chunk and folded in chunk order is deterministic.
inline void parallel_for_chunks(int n_chunks, int threads,
                                const std::function<void(int)>& fn) {
    if (threads <= 1 || n_chunks <= 1) {
        for (int i = 0; i < n_chunks; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    int workers = std::min(threads, n_chunks);
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                int i = next.fetch_add(1, std::memory_order_relaxed);
                if (i >= n_chunks) return;
                fn(i);
            }
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace anerf
