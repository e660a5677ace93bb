#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <thread>
#include <type_traits>
#include <vector>

namespace forge {

// Runs fn(i) for i in [0, count) on up to `workers` threads and returns the
// results in index order. fn must not throw; wrap failures in the result.
template <class Fn> auto parallel_map(std::size_t count, unsigned workers, Fn fn) {
    using R = std::invoke_result_t<Fn, std::size_t>;
    std::vector<R> out(count);
    if (workers == 0)
        workers = std::max(1u, std::thread::hardware_concurrency());
    workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(count, 1)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i)
            out[i] = fn(i);
        return out;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++)
                out[i] = fn(i);
        });
    for (auto &t : pool)
        t.join();
    return out;
}

} // namespace forge
