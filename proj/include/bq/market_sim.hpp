#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace bq {

struct BsParams {
    double s0 = 100.0;
    double rho = 0.0;    // drift rate per year
    double sigma = 0.2;  // volatility per sqrt-year

    void validate() const;  // s0 > 0, sigma > 0
};

// Jump part of the Merton model: intensity, jump variance and mean jump size.
struct MertonTheta {
    double lambda = 1.0;
    double delta_sq = 0.01;
    double m = 0.0;

    void validate() const;             // lambda > 0, delta_sq > 0
    void validate_degenerate() const;  // lambda >= 0, delta_sq >= 0
};

// Quotes S_{t_1..t_{n+1}} on [-tau, 0]; times strictly increasing, last = 0.
struct ObservationSeries {
    std::vector<double> times;
    std::vector<double> quotes;

    std::size_t size() const noexcept { return times.size(); }
    double tau() const { return -times.front(); }
    void validate() const;
};

// Exact jump times and heights on [-tau, 0], as seen by a continuous observer.
struct JumpRecord {
    double tau = 0.0;
    std::vector<double> jump_times;
    std::vector<double> jump_sizes;

    std::size_t count() const noexcept { return jump_sizes.size(); }
    void validate() const;

    // Jumps inside the shorter window [-window, 0].
    JumpRecord restricted(double window) const;
};

struct MertonPath {
    ObservationSeries series;
    JumpRecord jumps;
};

// Grid -tau = t_0 < ... < t_k = 0 with spacing `step` measured back from 0.
std::vector<double> make_grid(double tau, double step);

// X_t = rho*t + sigma*W_t with W_0 = 0.  The diffusion stream is
// derive_seed(seed, 0), shared with simulate_merton_path.
ObservationSeries simulate_bs_path(const BsParams& params, std::span<const double> grid,
                                   std::uint64_t seed);

// Compound-Poisson record: N ~ Poisson(lambda*tau), uniform order-statistic
// times, N(m, delta_sq) heights.  Uses the stream derive_seed(seed, 1).
JumpRecord simulate_jump_record(const MertonTheta& theta, double tau, std::uint64_t seed);

MertonPath simulate_merton_path(const BsParams& bs, const MertonTheta& theta, double tau,
                                double grid_step, std::uint64_t seed);

// Keeps indices 0, k, 2k, ... and always the final point at t = 0.
ObservationSeries subsample(const ObservationSeries& series, std::size_t every_k);

}  // namespace bq
