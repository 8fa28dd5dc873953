#pragma once

#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace marlab {

/// Run f(0), ..., f(n-1), concurrently when the machine has more than one
/// hardware thread. Callers must ensure every index owns its state and draws
/// from its own derived random stream, so results never depend on scheduling.
/// The first exception (if any) is rethrown after all workers join.
template <typename F>
void parallel_for(int n, F&& f, int max_threads = 0) {
    int hw = max_threads > 0 ? max_threads
                             : static_cast<int>(std::thread::hardware_concurrency());
    if (hw < 1) hw = 1;
    const int workers = n < hw ? n : hw;
    if (workers <= 1) {
        for (int i = 0; i < n; ++i) f(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr err;
    std::mutex err_mu;
    auto body = [&]() {
        while (true) {
            const int i = next.fetch_add(1);
            if (i >= n) return;
            try {
                f(i);
            } catch (...) {
                std::lock_guard<std::mutex> lk(err_mu);
                if (!err) err = std::current_exception();
            }
        }
    };
    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (int w = 0; w < workers; ++w) threads.emplace_back(body);
    for (auto& t : threads) t.join();
    if (err) std::rethrow_exception(err);
}

}  // namespace marlab
