#include "bq/market_sim.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bq/errors.hpp"
#include "bq/rng.hpp"

namespace bq {

void BsParams::validate() const {
    require(s0 > 0.0 && std::isfinite(s0), ErrorKind::invalid_input, "s0 must be > 0");
    require(sigma > 0.0 && std::isfinite(sigma), ErrorKind::invalid_input, "sigma must be > 0");
    require(std::isfinite(rho), ErrorKind::invalid_input, "rho must be finite");
}

void MertonTheta::validate() const {
    require(lambda > 0.0 && std::isfinite(lambda), ErrorKind::invalid_input, "lambda must be > 0");
    require(delta_sq > 0.0 && std::isfinite(delta_sq), ErrorKind::invalid_input,
            "delta_sq must be > 0");
    require(std::isfinite(m), ErrorKind::invalid_input, "m must be finite");
}

void MertonTheta::validate_degenerate() const {
    require(lambda >= 0.0 && std::isfinite(lambda), ErrorKind::invalid_input,
            "lambda must be >= 0");
    require(delta_sq >= 0.0 && std::isfinite(delta_sq), ErrorKind::invalid_input,
            "delta_sq must be >= 0");
    require(std::isfinite(m), ErrorKind::invalid_input, "m must be finite");
}

void ObservationSeries::validate() const {
    require(times.size() == quotes.size(), ErrorKind::invalid_input,
            "times and quotes differ in length");
    require(times.size() >= 2, ErrorKind::invalid_input, "series needs at least 2 points");
    for (std::size_t i = 0; i < times.size(); ++i) {
        require(std::isfinite(times[i]), ErrorKind::invalid_input, "non-finite timestamp");
        require(quotes[i] > 0.0 && std::isfinite(quotes[i]), ErrorKind::invalid_input,
                "quote at index " + std::to_string(i) + " is not positive");
        if (i > 0) {
            require(times[i] > times[i - 1], ErrorKind::invalid_input,
                    "timestamps not strictly increasing at index " + std::to_string(i));
        }
    }
    require(times.back() == 0.0, ErrorKind::invalid_input, "last timestamp must be 0");
}

void JumpRecord::validate() const {
    require(tau > 0.0 && std::isfinite(tau), ErrorKind::invalid_input, "tau must be > 0");
    require(jump_times.size() == jump_sizes.size(), ErrorKind::invalid_input,
            "jump times and sizes differ in length");
    for (std::size_t i = 0; i < jump_times.size(); ++i) {
        require(jump_times[i] >= -tau && jump_times[i] <= 0.0, ErrorKind::invalid_input,
                "jump time outside [-tau, 0]");
        require(jump_sizes[i] != 0.0 && std::isfinite(jump_sizes[i]), ErrorKind::invalid_input,
                "jump size at index " + std::to_string(i) + " is zero or non-finite");
        if (i > 0) {
            require(jump_times[i] > jump_times[i - 1], ErrorKind::invalid_input,
                    "jump times not strictly increasing");
        }
    }
}

JumpRecord JumpRecord::restricted(double window) const {
    require(window > 0.0 && window <= tau, ErrorKind::invalid_input,
            "restriction window must lie in (0, tau]");
    JumpRecord out;
    out.tau = window;
    for (std::size_t i = 0; i < jump_times.size(); ++i) {
        if (jump_times[i] >= -window) {
            out.jump_times.push_back(jump_times[i]);
            out.jump_sizes.push_back(jump_sizes[i]);
        }
    }
    return out;
}

std::vector<double> make_grid(double tau, double step) {
    require(tau > 0.0 && std::isfinite(tau), ErrorKind::invalid_input, "tau must be > 0");
    require(step > 0.0 && std::isfinite(step), ErrorKind::invalid_input, "grid step must be > 0");
    const auto steps = static_cast<std::size_t>(std::ceil(tau / step - 1e-9));
    std::vector<double> grid(steps + 1);
    grid[0] = -tau;
    for (std::size_t j = 1; j <= steps; ++j) {
        grid[j] = -static_cast<double>(steps - j) * step;
    }
    return grid;
}

namespace {

// Brownian path on the grid, started at 0 on grid.front() and shifted so the
// value at t = 0 (the last grid point) is 0.
std::vector<double> brownian_on_grid(std::span<const double> grid, std::uint64_t seed) {
    rng::Xoshiro256 gen(rng::derive_seed(seed, 0));
    std::vector<double> w(grid.size(), 0.0);
    for (std::size_t j = 1; j < grid.size(); ++j) {
        w[j] = w[j - 1] + std::sqrt(grid[j] - grid[j - 1]) * gen.normal();
    }
    const double w_now = w.back();
    for (double& x : w) x -= w_now;
    return w;
}

void check_grid(std::span<const double> grid) {
    require(grid.size() >= 2, ErrorKind::invalid_input, "grid needs at least 2 points");
    for (std::size_t j = 1; j < grid.size(); ++j) {
        require(grid[j] > grid[j - 1], ErrorKind::invalid_input,
                "grid not strictly increasing at index " + std::to_string(j));
    }
    require(grid.back() == 0.0, ErrorKind::invalid_input, "grid must end at t = 0");
}

}  // namespace

ObservationSeries simulate_bs_path(const BsParams& params, std::span<const double> grid,
                                   std::uint64_t seed) {
    require(params.s0 > 0.0, ErrorKind::invalid_input, "s0 must be > 0");
    require(params.sigma >= 0.0, ErrorKind::invalid_input, "sigma must be >= 0");
    check_grid(grid);
    ObservationSeries out;
    out.times.assign(grid.begin(), grid.end());
    out.quotes.resize(grid.size());
    if (params.sigma == 0.0) {
        for (std::size_t j = 0; j < grid.size(); ++j) {
            out.quotes[j] = params.s0 * std::exp(params.rho * grid[j]);
        }
        return out;
    }
    const auto w = brownian_on_grid(grid, seed);
    for (std::size_t j = 0; j < grid.size(); ++j) {
        out.quotes[j] = params.s0 * std::exp(params.rho * grid[j] + params.sigma * w[j]);
    }
    return out;
}

JumpRecord simulate_jump_record(const MertonTheta& theta, double tau, std::uint64_t seed) {
    theta.validate_degenerate();
    require(tau > 0.0 && std::isfinite(tau), ErrorKind::invalid_input, "tau must be > 0");
    rng::Xoshiro256 gen(rng::derive_seed(seed, 1));
    JumpRecord rec;
    rec.tau = tau;
    const auto count = static_cast<std::size_t>(rng::poisson(gen, theta.lambda * tau));
    rec.jump_times.resize(count);
    for (auto& t : rec.jump_times) t = -tau * gen.uniform_open();
    std::sort(rec.jump_times.begin(), rec.jump_times.end());
    const double delta = std::sqrt(theta.delta_sq);
    rec.jump_sizes.resize(count);
    for (auto& y : rec.jump_sizes) y = theta.m + delta * gen.normal();
    return rec;
}

MertonPath simulate_merton_path(const BsParams& bs, const MertonTheta& theta, double tau,
                                double grid_step, std::uint64_t seed) {
    const auto grid = make_grid(tau, grid_step);
    MertonPath path;
    path.series = simulate_bs_path(bs, grid, seed);
    path.jumps = simulate_jump_record(theta, tau, seed);
    // X_t carries minus the jumps in (t, 0] because X_0 = 0.
    const auto& jt = path.jumps.jump_times;
    const auto& js = path.jumps.jump_sizes;
    double future = 0.0;
    std::size_t k = jt.size();
    for (std::size_t j = grid.size(); j-- > 0;) {
        while (k > 0 && jt[k - 1] > grid[j]) {
            --k;
            future += js[k];
        }
        path.series.quotes[j] *= std::exp(-future);
    }
    return path;
}

ObservationSeries subsample(const ObservationSeries& series, std::size_t every_k) {
    require(every_k >= 1, ErrorKind::invalid_input, "every_k must be >= 1");
    ObservationSeries out;
    const std::size_t n = series.size();
    for (std::size_t i = 0; i < n; i += every_k) {
        out.times.push_back(series.times[i]);
        out.quotes.push_back(series.quotes[i]);
    }
    if (n > 0 && (n - 1) % every_k != 0) {
        out.times.push_back(series.times.back());
        out.quotes.push_back(series.quotes.back());
    }
    require(out.size() >= 2, ErrorKind::invalid_input, "subsampled series has fewer than 2 points");
    return out;
}

}  // namespace bq
