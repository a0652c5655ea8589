#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace levyhedge {

// Deterministic fan-out: each path owns an independent stream derived from
// (master seed, path index), so results do not depend on worker scheduling.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t master, std::uint64_t index) {
    return splitmix64(splitmix64(master) ^ splitmix64(index * 0x9e3779b97f4a7c15ULL + 1));
}

class PathRng {
public:
    PathRng(std::uint64_t master_seed, std::uint64_t path_index)
        : engine_(mix_seed(master_seed, path_index)) {}

    explicit PathRng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

    double uniform() {
        return std::uniform_real_distribution<double>(0.0, 1.0)(engine_);
    }

    double normal() {
        return std::normal_distribution<double>(0.0, 1.0)(engine_);
    }

    double normal(double mean, double stddev) {
        return mean + stddev * normal();
    }

    double exponential(double rate) {
        return std::exponential_distribution<double>(rate)(engine_);
    }

    long poisson(double mean) {
        if (mean <= 0.0) return 0;
        return std::poisson_distribution<long>(mean)(engine_);
    }

    std::size_t index(std::size_t n) {
        return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
    }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
};

} // namespace levyhedge
