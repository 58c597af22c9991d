#pragma once

#include <atomic>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <type_traits>
#include <vector>

namespace enkf {

/// Run `task(run_index)` for run_index = 0..runs-1 across `parallelism`
/// worker threads and return the results in run order. The aggregate is
/// independent of the schedule because each run owns its index (and
/// therefore its RNG stream) and results are collected by index.
/// parallelism <= 0 means hardware concurrency.
template <typename Fn>
auto mc_driver(int runs, int parallelism, Fn&& task)
    -> std::vector<std::invoke_result_t<Fn&, int>> {
    using Result = std::invoke_result_t<Fn&, int>;
    if (runs < 1) throw std::invalid_argument("mc_driver: runs must be >= 1");
    if (parallelism <= 0)
        parallelism = static_cast<int>(std::thread::hardware_concurrency());
    if (parallelism < 1) parallelism = 1;
    if (parallelism > runs) parallelism = runs;

    std::vector<std::optional<Result>> slots(runs);
    std::atomic<int> next{0};
    std::mutex error_mutex;
    std::optional<std::string> error;

    auto worker = [&] {
        for (;;) {
            const int index = next.fetch_add(1);
            if (index >= runs) return;
            try {
                slots[index] = task(index);
            } catch (const std::exception& e) {
                std::lock_guard lock(error_mutex);
                if (!error)
                    error = "run " + std::to_string(index) + ": " + e.what();
                return;
            }
        }
    };

    if (parallelism == 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        threads.reserve(parallelism);
        for (int t = 0; t < parallelism; ++t) threads.emplace_back(worker);
        for (auto& thread : threads) thread.join();
    }
    if (error) throw std::runtime_error(*error);

    std::vector<Result> results;
    results.reserve(runs);
    for (auto& slot : slots) results.push_back(std::move(*slot));
    return results;
}

}  // namespace enkf
