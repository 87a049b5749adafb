#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace ldsim {

/// Runs fn(0..n-1) across up to `parallelism` threads. The first exception is
/// rethrown on the calling thread after all workers join.
inline void run_indexed(std::size_t n, int parallelism, const std::function<void(std::size_t)>& fn) {
    if (n == 0) {
        return;
    }
    if (parallelism <= 1 || n == 1) {
        for (std::size_t i = 0; i < n; ++i) {
            fn(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::mutex err_mu;
    std::exception_ptr first_error;
    auto worker = [&] {
        while (true) {
            std::size_t i = next.fetch_add(1);
            if (i >= n) {
                return;
            }
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mu);
                if (!first_error) {
                    first_error = std::current_exception();
                }
            }
        }
    };
    std::size_t threads = std::min<std::size_t>(static_cast<std::size_t>(parallelism), n);
    std::vector<std::thread> workers;
    workers.reserve(threads);
    for (std::size_t i = 0; i < threads; ++i) {
        workers.emplace_back(worker);
    }
    for (auto& w : workers) {
        w.join();
    }
    if (first_error) {
        std::rethrow_exception(first_error);
    }
}

}  // namespace ldsim
