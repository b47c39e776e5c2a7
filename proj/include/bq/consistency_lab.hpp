#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bq/analytic_pricing.hpp"
#include "bq/bayes_engine.hpp"
#include "bq/parallel.hpp"
#include "bq/quadrature.hpp"

namespace bq {

// One-dimensional Laplace-type ratio
//     int exp(-n h_n) g pi / int exp(-n h_n) pi  ->  g(theta0).
// For a non-integrable prior an envelope a(theta) with int exp(-a) < inf is
// required; saddle_ratio then checks that exp(-n h_n) pi <= C exp(-a) holds
// towards every open end of the domain before integrating.
struct SaddleProblem {
    std::function<double(double n, double theta)> h_n;
    std::function<double(double theta)> h;
    std::function<double(double theta)> g;
    VariancePrior prior = VariancePrior::noninformative();
    bool prior_integrable = true;
    double theta0 = 0.0;
    std::optional<std::function<double(double theta)>> envelope_a;
    Bracket domain{};
    std::string name;

    // h has its grid minimum within one grid step of theta0 and no grid point
    // falls below h(theta0).
    void validate() const;
};

struct ConvergenceRow {
    double index = 0.0;  // n or tau
    double subjective = 0.0;
    double reference = 0.0;
    double rel_diff = 0.0;
    double err = 0.0;
    std::size_t skipped = 0;  // histories dropped at this index
};

struct ConvergenceTable {
    std::vector<ConvergenceRow> rows;

    void validate() const;  // indices strictly increasing
    // Fraction of consecutive rows whose |subjective - reference| decreases.
    double trend() const;
    bool last_strictly_decreasing(std::size_t count) const;
};

double saddle_ratio(const SaddleProblem& prob, std::size_t n, double tol);

ConvergenceTable saddle_convergence_check(const SaddleProblem& prob,
                                          std::span<const std::size_t> n_list, double tol);

// h_n = h = (theta - 1)^2 / 2 on (0, 2), pi = 1.
SaddleProblem quadratic_saddle_problem(std::function<double(double)> g);

// h_n(v) = (s_n/v + log v)/2, shifted to vanish at v = s_n, on (0, inf) with
// the unit prior and envelope a(v) = 1{v > 1} 2 log v.  s_n = sigma_hat_sq(n);
// g is the BS price in v.
SaddleProblem bs_saddle_problem(double sigma0_sq, std::function<double(double n)> sigma_hat_sq,
                                std::function<double(double)> g);

struct MartingaleCheck {
    double estimate = 0.0;
    double std_error = 0.0;
    double s0 = 0.0;
    bool pass = false;  // |estimate - s0| <= 3 std_error
};

inline constexpr std::size_t kMartingaleBlock = 1 << 14;

MartingaleCheck martingale_check_bs(const BsPosterior& post, double s0, double rho, double maturity,
                                    std::size_t n_mc, std::uint64_t seed,
                                    Exec exec = Exec::parallel);

MartingaleCheck martingale_check_merton(const MertonPosterior& post, double s0, double rho,
                                        double sigma, double maturity, std::size_t n_mc,
                                        std::uint64_t seed, Exec exec = Exec::parallel);

struct BsExperiment {
    double s0 = 100.0;
    double rho = 0.002;
    double sigma0 = 0.158;
    double maturity = 0.25;
    double strike = 100.0;
    double dt = 1.0 / 252.0;
    VariancePrior prior = VariancePrior::noninformative();
    double quad_tol = 1e-8;
};

// Per n: median over seeds of |subjective - bs(sigma0)| / bs(sigma0).  Each
// seed simulates one history of max(n_list) increments; the window for n is
// its last n increments.
ConvergenceTable bs_convergence_experiment(const BsExperiment& preset,
                                           std::span<const std::size_t> n_list,
                                           std::span<const std::uint64_t> seeds,
                                           Exec exec = Exec::parallel);

struct MertonExperiment {
    double s0 = 100.0;
    double rho = 0.002;
    double sigma = 0.158;
    MertonTheta theta0{4.0, 0.0025, 0.0};
    double maturity = 0.25;
    double strike = 100.0;
    ThetaPrior prior = ThetaPrior::noninformative();
    std::size_t n_samples = 20000;
    double series_tol = 1e-10;
};

// Per tau: median over seeds of the relative gap to merton_mc_price(theta0).
// Histories with too few jumps for a proper posterior are skipped and counted.
ConvergenceTable merton_convergence_experiment(const MertonExperiment& preset,
                                               std::span<const double> tau_list,
                                               std::span<const std::uint64_t> seeds,
                                               Exec exec = Exec::parallel);

// Subjective price of one history as the window tau grows.  Posterior draws
// use the same seed at every tau, so between jumps the trace is smooth.
struct PriceTrace {
    std::vector<double> taus;
    std::vector<double> prices;  // NaN where the posterior is improper
    std::vector<double> errors;
    JumpRecord jumps;  // full record on [-max tau, 0]
};

PriceTrace merton_price_trace(const MertonExperiment& preset, std::span<const double> tau_grid,
                              std::uint64_t seed, Exec exec = Exec::parallel);

// Indices i (into taus, i >= 1) where |p_i - p_{i-1}| > factor * max(err_i, err_{i-1}).
std::vector<std::size_t> detect_discontinuities(const PriceTrace& trace, double factor);

}  // namespace bq
