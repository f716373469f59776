#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace advrobust {

/// Welford accumulator. merge() uses Chan's pairwise update, so a fixed merge
/// order gives bit-identical results.
struct RunningStats {
    std::uint64_t count = 0;
    double mean = 0.0;
    double m2 = 0.0;

    void push(double v) {
        ++count;
        const double d = v - mean;
        mean += d / static_cast<double>(count);
        m2 += d * (v - mean);
    }

    void merge(const RunningStats& o) {
        if (o.count == 0) return;
        if (count == 0) {
            *this = o;
            return;
        }
        const double n = static_cast<double>(count + o.count);
        const double d = o.mean - mean;
        mean += d * static_cast<double>(o.count) / n;
        m2 += o.m2 + d * d * static_cast<double>(count) * static_cast<double>(o.count) / n;
        count += o.count;
    }

    double variance() const { return count > 1 ? m2 / static_cast<double>(count - 1) : 0.0; }
    double std_error() const {
        return count > 0 ? std::sqrt(variance() / static_cast<double>(count)) : 0.0;
    }
};

inline constexpr std::size_t kShardSize = 1024;

namespace detail {
inline std::atomic<unsigned>& worker_thread_setting() {
    static std::atomic<unsigned> n{0};
    return n;
}
}  // namespace detail

/// 0 means std::thread::hardware_concurrency().
inline void set_worker_threads(unsigned n) { detail::worker_thread_setting() = n; }

inline unsigned worker_threads() {
    unsigned n = detail::worker_thread_setting();
    if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
    return n;
}

/// Runs fn(begin, end) over shards of kShardSize consecutive indices and
/// returns the per-shard results in index order.
template <typename Result, typename Fn>
std::vector<Result> map_shards(std::uint64_t n, Fn&& fn) {
    const std::uint64_t n_shards = (n + kShardSize - 1) / kShardSize;
    std::vector<Result> out(n_shards);
    const unsigned threads =
        static_cast<unsigned>(std::min<std::uint64_t>(worker_threads(), n_shards));
    auto run_shard = [&](std::uint64_t s) {
        const std::uint64_t begin = s * kShardSize;
        out[s] = fn(begin, std::min<std::uint64_t>(n, begin + kShardSize));
    };
    if (threads <= 1) {
        for (std::uint64_t s = 0; s < n_shards; ++s) run_shard(s);
        return out;
    }
    std::atomic<std::uint64_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (std::uint64_t s = next++; s < n_shards; s = next++) {
                try {
                    run_shard(s);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    pool.clear();
    if (error) std::rethrow_exception(error);
    return out;
}

/// Sharded Monte Carlo over K per-sample quantities. `sample(i)` returns a
/// std::array<double, K>; statistics are merged shard by shard in index order.
template <std::size_t K, typename SampleFn>
std::array<RunningStats, K> sharded_stats(std::uint64_t n, SampleFn&& sample) {
    using Stats = std::array<RunningStats, K>;
    auto shards = map_shards<Stats>(n, [&](std::uint64_t begin, std::uint64_t end) {
        Stats s{};
        for (std::uint64_t i = begin; i < end; ++i) {
            const std::array<double, K> v = sample(i);
            for (std::size_t k = 0; k < K; ++k) s[k].push(v[k]);
        }
        return s;
    });
    Stats total{};
    for (const auto& s : shards)
        for (std::size_t k = 0; k < K; ++k) total[k].merge(s[k]);
    return total;
}

}  // namespace advrobust
