#pragma once

#include <cstddef>
#include <functional>
#include <utility>
#include <vector>

namespace mgs {

/// Process-wide worker cap (the CLI's --threads). Defaults to hardware concurrency.
void set_thread_count(int threads);
int thread_count();

/// In strict mode every reduction uses a fixed chunk layout that does not
/// depend on the worker count, so results are bit-identical across runs and
/// across --threads settings.
void set_strict_deterministic(bool on);
bool strict_deterministic();

using Range = std::pair<std::size_t, std::size_t>;

/// Splits [0, n) into `chunks` contiguous, nearly equal ranges.
std::vector<Range> split_range(std::size_t n, std::size_t chunks);

/// Number of partial buffers a reduction over n items should use.
std::size_t reduction_chunk_count(std::size_t n);

/// Runs body(begin, end) over contiguous chunks of [0, n) on up to
/// thread_count() workers. Chunks never overlap.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

/// Runs body(chunk_index, begin, end) for each of the given ranges.
void parallel_chunks(const std::vector<Range>& ranges,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& body);

}  // namespace mgs
