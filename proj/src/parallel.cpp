#include "mgs/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <thread>

namespace mgs {

namespace {

std::atomic<int> g_threads{0};
std::atomic<bool> g_strict{false};

constexpr std::size_t kStrictChunks = 16;

}  // namespace

void set_thread_count(int threads) { g_threads = std::max(1, threads); }

int thread_count() {
    const int t = g_threads.load();
    if (t > 0) return t;
    return std::max(1u, std::thread::hardware_concurrency());
}

void set_strict_deterministic(bool on) { g_strict = on; }
bool strict_deterministic() { return g_strict.load(); }

std::vector<Range> split_range(std::size_t n, std::size_t chunks) {
    chunks = std::max<std::size_t>(1, std::min(chunks, std::max<std::size_t>(n, 1)));
    std::vector<Range> out;
    out.reserve(chunks);
    const std::size_t base = n / chunks, extra = n % chunks;
    std::size_t begin = 0;
    for (std::size_t c = 0; c < chunks; ++c) {
        const std::size_t len = base + (c < extra ? 1 : 0);
        out.emplace_back(begin, begin + len);
        begin += len;
    }
    return out;
}

std::size_t reduction_chunk_count(std::size_t n) {
    const std::size_t want = strict_deterministic() ? kStrictChunks : static_cast<std::size_t>(thread_count());
    return std::max<std::size_t>(1, std::min(want, n));
}

void parallel_chunks(const std::vector<Range>& ranges,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& body) {
    const std::size_t workers = std::min<std::size_t>(thread_count(), ranges.size());
    if (workers <= 1) {
        for (std::size_t c = 0; c < ranges.size(); ++c) body(c, ranges[c].first, ranges[c].second);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t c = next++; c < ranges.size(); c = next++) body(c, ranges[c].first, ranges[c].second);
        });
    }
}

void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body) {
    if (n == 0) return;
    const std::size_t workers = static_cast<std::size_t>(thread_count());
    if (workers <= 1 || n < 64) {
        body(0, n);
        return;
    }
    // Several chunks per worker evens out load when per-item cost varies.
    parallel_chunks(split_range(n, workers * 4), [&](std::size_t, std::size_t b, std::size_t e) { body(b, e); });
}

}  // namespace mgs
