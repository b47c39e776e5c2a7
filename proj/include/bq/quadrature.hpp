#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>

namespace bq {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

using RealFn = std::function<double(double)>;

struct QuadResult {
    double value = 0.0;
    double abs_error_estimate = 0.0;
    std::size_t evaluations = 0;
    bool converged = false;
};

// Adaptive Gauss-Kronrod (7/15) with global bisection of the worst interval.
// The local error estimate is |K15 - G7|, unscaled.  Either end may be
// infinite; a semi-infinite range [a, inf) is mapped by x = a + s*u/(1-u),
// u in [0, 1), with s = max(1, |a|), and (-inf, b] by the mirror image.
// When the subdivision limit is hit the best estimate is returned with
// converged = false.
QuadResult integrate_adaptive(const RealFn& f, double a, double b, double abs_tol,
                              double rel_tol, std::size_t max_intervals = 4000);

// Same, starting from the given breakpoints (sorted; ends may be infinite).
QuadResult integrate_adaptive(const RealFn& f, std::span<const double> breakpoints,
                              double abs_tol, double rel_tol, std::size_t max_intervals = 4000);

struct Bracket {
    double lo = 0.0;
    double hi = kInf;
};

struct LogDensityOptions {
    // Range for the 257-point scouting grid; defaults to the bracket (clipped
    // to [1e-12, 1e12] for semi-infinite brackets on the positive axis).  A
    // bracket reaching below zero must be finite or come with a scout range.
    std::optional<Bracket> scout;
    double z_rel_tol = 1e-10;
    std::size_t max_intervals = 4000;
};

// Integrals of exp(log_f) and g*exp(log_f), both computed on one shared
// adaptive partition after shifting log_f by its maximum.
struct LogDensityIntegral {
    double log_z = 0.0;
    double z_rel_error = 0.0;
    double ratio = 0.0;  // int g f / int f
    double ratio_error = 0.0;
    double mode = 0.0;
    double log_peak = 0.0;
    std::size_t evaluations = 0;
    bool converged = false;
};

// `g` may be empty, in which case ratio is 1.  Throws degenerate_density when
// log_f is -inf (or NaN) on the whole scouting grid.
LogDensityIntegral integrate_log_density(const RealFn& log_f, const RealFn& g, Bracket domain,
                                         double ratio_tol, const LogDensityOptions& opts = {});

// int g f / int f over the bracket, with tol bounding the ratio's error.
QuadResult expectation_1d(const RealFn& g, const RealFn& log_density_unnormalized,
                          Bracket bracket, double tol);

}  // namespace bq
