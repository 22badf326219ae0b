#pragma once

// Seeded random substreams and deterministic chunked Monte-Carlo reduction.
//
// Every random draw in a run comes from a stream keyed by
// (master seed, outer iteration, phase, worker). Sample loops are cut into
// fixed-size chunks; chunk j always uses worker index j, so the partial sums
// do not depend on how many threads execute the chunks. Partial sums are
// combined in chunk order with compensated summation.

#include "starcut/core.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <thread>
#include <vector>

namespace starcut {

using Stream = std::mt19937_64;

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace detail

/// Stream for the tuple (master_seed, iteration, phase, worker).
/// The raw tuple words are fed to the seed sequence alongside mixed words,
/// so identical tuples give identical streams and distinct tuples give
/// distinct seed material.
inline Stream seed_schedule(std::uint64_t master_seed, std::uint64_t iteration,
                            std::uint64_t phase, std::uint64_t worker) {
  const std::array<std::uint64_t, 4> key{master_seed, iteration, phase, worker};
  std::uint64_t h = 0x5EEDC0DEULL;
  std::vector<std::uint32_t> words;
  words.reserve(16);
  for (std::uint64_t k : key) {
    words.push_back(static_cast<std::uint32_t>(k));
    words.push_back(static_cast<std::uint32_t>(k >> 32));
    h = detail::splitmix64(h ^ k);
    words.push_back(static_cast<std::uint32_t>(h));
    words.push_back(static_cast<std::uint32_t>(h >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  return Stream(seq);
}

/// Hands out phase indices within one outer iteration.
class RandomSource {
 public:
  RandomSource(std::uint64_t master_seed, std::uint64_t iteration, int workers = 1)
      : master_(master_seed), iteration_(iteration), workers_(std::max(1, workers)) {}

  std::uint64_t next_phase() { return phase_++; }
  Stream stream(std::uint64_t phase, std::uint64_t worker) const {
    return seed_schedule(master_, iteration_, phase, worker);
  }
  /// Sequential stream for a freshly allocated phase.
  Stream fresh_stream() { return stream(next_phase(), 0); }

  int workers() const { return workers_; }
  std::uint64_t master_seed() const { return master_; }
  std::uint64_t iteration() const { return iteration_; }
  std::uint64_t phases_used() const { return phase_; }

 private:
  std::uint64_t master_;
  std::uint64_t iteration_;
  std::uint64_t phase_ = 0;
  int workers_;
};

inline constexpr std::size_t kChunkSize = 2048;

/// Runs `body(stream, count, sums)` over ceil(total / kChunkSize) chunks and
/// returns the chunk-ordered compensated totals of the `width` accumulators.
template <class Body>
std::vector<double> chunked_sums(RandomSource& source, std::size_t total, std::size_t width,
                                 Body&& body) {
  const std::uint64_t phase = source.next_phase();
  const std::size_t chunks = (total + kChunkSize - 1) / kChunkSize;
  std::vector<std::vector<double>> partial(chunks, std::vector<double>(width, 0.0));

  auto run_chunk = [&](std::size_t j) {
    Stream stream = source.stream(phase, j);
    const std::size_t count = std::min(kChunkSize, total - j * kChunkSize);
    body(stream, count, partial[j]);
  };

  const std::size_t workers = std::min<std::size_t>(source.workers(), chunks);
  if (workers <= 1) {
    for (std::size_t j = 0; j < chunks; ++j) run_chunk(j);
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t j = w; j < chunks; j += workers) run_chunk(j);
      });
    }
  }

  std::vector<double> totals(width, 0.0);
  for (std::size_t k = 0; k < width; ++k) {
    CompensatedSum acc;
    for (const auto& p : partial) acc.add(p[k]);
    totals[k] = acc.value();
  }
  return totals;
}

/// Runs `body(stream, count, out)` per chunk, where `out` is the chunk's
/// slice of the returned vector of `total` values.
template <class Body>
std::vector<double> chunked_values(RandomSource& source, std::size_t total, Body&& body) {
  const std::uint64_t phase = source.next_phase();
  const std::size_t chunks = (total + kChunkSize - 1) / kChunkSize;
  std::vector<double> values(total, 0.0);

  auto run_chunk = [&](std::size_t j) {
    Stream stream = source.stream(phase, j);
    const std::size_t count = std::min(kChunkSize, total - j * kChunkSize);
    body(stream, count, std::span<double>(values.data() + j * kChunkSize, count));
  };

  const std::size_t workers = std::min<std::size_t>(source.workers(), chunks);
  if (workers <= 1) {
    for (std::size_t j = 0; j < chunks; ++j) run_chunk(j);
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t j = w; j < chunks; j += workers) run_chunk(j);
      });
    }
  }
  return values;
}

}  // namespace starcut
