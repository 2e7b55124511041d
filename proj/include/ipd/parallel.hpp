#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace ipd {

// Runs fn(i) for i in [0, n). Work is claimed in fixed-size chunks; every
// result must be written to a slot addressed by i so the outcome is bitwise
// identical for any worker count.
template <typename Fn>
void parallel_for(int n, int jobs, Fn&& fn) {
    if (n <= 0) return;
    if (jobs <= 0) jobs = int(std::thread::hardware_concurrency());
    jobs = std::max(1, std::min(jobs, n));
    if (jobs == 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    const int chunk = std::max(1, n / (jobs * 8));
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::atomic<bool> failed{false};
    auto worker = [&] {
        for (;;) {
            int begin = next.fetch_add(chunk);
            if (begin >= n || failed.load()) return;
            int end = std::min(n, begin + chunk);
            try {
                for (int i = begin; i < end; ++i) fn(i);
            } catch (...) {
                if (!failed.exchange(true)) error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(jobs);
    for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (failed.load()) std::rethrow_exception(error);
}

} // namespace ipd
