#pragma once

#include <cstddef>
#include <functional>

namespace rdq {

// Worker count from RDQUANT_THREADS (unset or 0 means hardware concurrency).
std::size_t thread_count();

// Calls fn(chunk, begin, end) for every fixed-size chunk of [0, n). Chunk
// boundaries depend only on n and chunk_size, so per-chunk partial results
// reduced in chunk order are independent of the worker count.
void for_each_chunk(std::size_t n, std::size_t chunk_size,
                    const std::function<void(std::size_t, std::size_t, std::size_t)>& fn);

inline std::size_t chunk_count(std::size_t n, std::size_t chunk_size) {
  return (n + chunk_size - 1) / chunk_size;
}

}  // namespace rdq
