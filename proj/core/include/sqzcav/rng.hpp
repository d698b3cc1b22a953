#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace sqzcav::rng {

// Seed -> stream mapping (stable; fixtures depend on it):
//   sub-seed(master, stream) = splitmix64(master ^ splitmix64(stream + 1))
//   sequential streams: std::mt19937_64 seeded with the sub-seed
//   counter draws:      uniform(key, k) = top 53 bits of splitmix64(key + k) / 2^53
//   normals:            Box-Muller on consecutive uniform pairs, cosine branch only

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) noexcept {
    return splitmix64(master ^ splitmix64(stream + 1));
}

/// Uniform in (0, 1): never returns 0, so log() below is safe.
inline double to_open_unit(std::uint64_t bits) noexcept {
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

inline double box_muller(double u1, double u2) noexcept {
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

/// Standard normal addressed by (key, index); order independent.
inline double counter_normal(std::uint64_t key, std::uint64_t index) noexcept {
    const double u1 = to_open_unit(splitmix64(key + 2 * index));
    const double u2 = to_open_unit(splitmix64(key + 2 * index + 1));
    return box_muller(u1, u2);
}

/// Sequential standard normals. std::normal_distribution is not used because
/// its output is implementation defined.
class NormalStream {
public:
    explicit NormalStream(std::uint64_t seed) : engine_(seed) {}

    double operator()() noexcept {
        const double u1 = to_open_unit(engine_());
        const double u2 = to_open_unit(engine_());
        return box_muller(u1, u2);
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace sqzcav::rng
