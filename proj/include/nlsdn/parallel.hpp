#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace nlsdn {

// Runs fn(i) for i in [0, n) on up to `threads` workers. Results come back in index order,
// so any reduction done afterwards is independent of scheduling. The first exception
// (lowest index) is rethrown after all workers finish.
template <class R>
std::vector<R> parallel_map(int n, int threads, const std::function<R(int)>& fn) {
    std::vector<R> out(static_cast<std::size_t>(std::max(n, 0)));
    if (n <= 0) return out;
    threads = std::clamp(threads, 1, n);
    if (threads == 1) {
        for (int i = 0; i < n; ++i) out[i] = fn(i);
        return out;
    }
    std::atomic<int> next{0};
    std::vector<std::exception_ptr> err(static_cast<std::size_t>(n));
    auto work = [&] {
        for (int i = next++; i < n; i = next++) {
            try {
                out[i] = fn(i);
            } catch (...) {
                err[i] = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
    for (auto& e : err)
        if (e) std::rethrow_exception(e);
    return out;
}

inline int default_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

}  // namespace nlsdn
