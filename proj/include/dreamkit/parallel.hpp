#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace dreamkit {

// Runs fn(i) for i in [0, n) on up to `jobs` threads. Work items must be
// independent; each writes only its own output slot. The first exception
// is rethrown after all threads join.
template <typename Fn>
void parallel_for(std::size_t n, int jobs, Fn&& fn) {
    if (jobs <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mu;
    auto worker = [&]() {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mu);
                if (!error) error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> threads;
    const std::size_t count = std::min<std::size_t>(static_cast<std::size_t>(jobs), n);
    threads.reserve(count);
    for (std::size_t t = 0; t < count; ++t) threads.emplace_back(worker);
    for (auto& th : threads) th.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace dreamkit
