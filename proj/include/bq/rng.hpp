#pragma once

// Portable random streams.
//
// Generator identity: xoshiro256** (Blackman & Vigna, 2018) whose 256-bit state
// is filled by four successive SplitMix64 outputs of the stream seed.  Stream
// seeds for parallel work are derived as
//
//     derive_seed(master, index) = mix64(master + 0x9E3779B97F4A7C15 * (index + 1))
//
// where mix64 is the SplitMix64 finalizer.  Uniform doubles take the top 53
// bits; normals use the Box-Muller pair (cos branch first, sin branch cached).
// Everything here is integer arithmetic plus libm log/sqrt/cos/sin, so a port
// reproduces the streams exactly up to libm rounding.

#include <array>
#include <cstdint>

namespace bq::rng {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t splitmix64(std::uint64_t& state) noexcept {
    state += kGolden;
    return mix64(state);
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept {
    return mix64(master + kGolden * (index + 1));
}

class Xoshiro256 {
public:
    using result_type = std::uint64_t;

    explicit Xoshiro256(std::uint64_t seed) noexcept;

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return ~result_type{0}; }

    result_type operator()() noexcept { return next(); }
    result_type next() noexcept;

    // [0, 1)
    double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
    // (0, 1)
    double uniform_open() noexcept {
        return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53;
    }
    double normal() noexcept;

private:
    std::array<std::uint64_t, 4> s_{};
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// Gamma(shape, 1) by Marsaglia-Tsang; shape < 1 uses the U^(1/shape) boost.
double gamma(Xoshiro256& gen, double shape);

// Poisson(mean) by sequential inversion; large means are split into chunks.
std::uint64_t poisson(Xoshiro256& gen, double mean);

}  // namespace bq::rng
