// Shared error types, parallel loop helper and seeded RNG streams.

#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace renseg {

struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& what) : std::runtime_error(what) {}
};

struct ArgumentError : std::runtime_error {
    explicit ArgumentError(const std::string& what) : std::runtime_error(what) {}
};

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct StateError : std::runtime_error {
    explicit StateError(const std::string& what) : std::runtime_error(what) {}
};

struct PrecisionError : std::runtime_error {
    explicit PrecisionError(const std::string& what) : std::runtime_error(what) {}
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

/// Splits [0, n) into contiguous chunks and runs `fn(begin, end)` on up to
/// `workers` threads. Chunk boundaries depend only on n and never on the
/// worker count, and chunks are disjoint, so any kernel that writes disjoint
/// outputs per index produces bit-identical results for every worker count.
inline void parallel_for(std::size_t n, unsigned workers,
                         const std::function<void(std::size_t, std::size_t)>& fn) {
    if (n == 0) return;
    if (workers <= 1 || n == 1) {
        fn(0, n);
        return;
    }
    const std::size_t chunk = (n + workers - 1) / workers;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t begin = 0; begin < n; begin += chunk) {
        const std::size_t end = std::min(n, begin + chunk);
        pool.emplace_back([&fn, begin, end] { fn(begin, end); });
    }
    for (auto& t : pool) t.join();
}

/// Deterministic per-purpose RNG stream. Streams depend only on the listed
/// keys, so e.g. the stream of (seed, iteration, slot) is the same no matter
/// which worker thread consumes it.
inline std::mt19937_64 rng_stream(std::uint64_t seed, std::uint64_t k1 = 0,
                                  std::uint64_t k2 = 0, std::uint64_t k3 = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(k1), static_cast<std::uint32_t>(k1 >> 32),
                      static_cast<std::uint32_t>(k2), static_cast<std::uint32_t>(k2 >> 32),
                      static_cast<std::uint32_t>(k3), static_cast<std::uint32_t>(k3 >> 32)};
    return std::mt19937_64(seq);
}

}  // namespace renseg
