#include "bq/rng.hpp"

#include <cmath>
#include <numbers>

namespace bq::rng {

namespace {

constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept { return (x << k) | (x >> (64 - k)); }

}  // namespace

Xoshiro256::Xoshiro256(std::uint64_t seed) noexcept {
    std::uint64_t sm = seed;
    for (auto& word : s_) word = splitmix64(sm);
}

Xoshiro256::result_type Xoshiro256::next() noexcept {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

double Xoshiro256::normal() noexcept {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    const double u1 = uniform_open();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(angle);
    has_spare_ = true;
    return r * std::cos(angle);
}

double gamma(Xoshiro256& gen, double shape) {
    if (shape < 1.0) {
        const double boosted = gamma(gen, shape + 1.0);
        return boosted * std::pow(gen.uniform_open(), 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x = 0.0;
        double v = 0.0;
        do {
            x = gen.normal();
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = gen.uniform_open();
        if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
        if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
}

std::uint64_t poisson(Xoshiro256& gen, double mean) {
    if (!(mean > 0.0)) return 0;
    constexpr double kChunk = 500.0;
    std::uint64_t total = 0;
    while (mean > kChunk) {
        total += poisson(gen, kChunk);
        mean -= kChunk;
    }
    const double u = gen.uniform();
    double p = std::exp(-mean);
    double cdf = p;
    std::uint64_t k = 0;
    const double cap = mean + 40.0 * std::sqrt(mean) + 40.0;
    while (u > cdf && static_cast<double>(k) < cap) {
        ++k;
        p *= mean / static_cast<double>(k);
        cdf += p;
    }
    return total + k;
}

}  // namespace bq::rng
