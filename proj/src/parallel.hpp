#pragma once

#include "rain/common.hpp"

#include <atomic>
#include <thread>
#include <vector>

namespace rain::detail {

// Deterministic parallel loop. Work is split into fixed-size chunks that do
// not depend on the thread count, so any per-chunk accumulation combined in
// chunk order is bitwise reproducible with 1 or N threads.
template <typename Fn>
void parallel_chunks(std::size_t count, std::size_t chunk_size, Fn&& fn) {
    if (count == 0) return;
    std::size_t n_chunks = (count + chunk_size - 1) / chunk_size;
    int threads = thread_cap();
    if (threads <= 1 || n_chunks == 1) {
        for (std::size_t c = 0; c < n_chunks; ++c)
            fn(c, c * chunk_size, std::min(count, (c + 1) * chunk_size));
        return;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            std::size_t c = next.fetch_add(1);
            if (c >= n_chunks) return;
            fn(c, c * chunk_size, std::min(count, (c + 1) * chunk_size));
        }
    };
    std::vector<std::thread> pool;
    int spawn = std::min<std::size_t>(threads, n_chunks);
    pool.reserve(spawn);
    for (int i = 0; i < spawn - 1; ++i) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
}

} // namespace rain::detail
