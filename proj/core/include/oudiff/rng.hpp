#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace oudiff {

std::uint64_t splitmix64(std::uint64_t x);

// Stream seed for a work item addressed by `path` under `master`. Streams for
// distinct paths are decorrelated; the mapping does not depend on thread count.
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path);

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double normal() { return normal_(engine_); }
    double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
    int sign() { return (engine_() >> 63) ? 1 : -1; }
    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_;
};

}  // namespace oudiff
