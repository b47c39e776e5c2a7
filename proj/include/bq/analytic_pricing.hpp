#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>

#include "bq/market_sim.hpp"
#include "bq/parallel.hpp"

namespace bq {

enum class OptionKind { call, put };

struct OptionSpec {
    OptionKind kind = OptionKind::call;
    double strike = 100.0;
    double maturity = 1.0;

    void validate() const;  // strike > 0, maturity > 0
};

enum class PriceMethod { closed_form, series, quadrature, posterior_mc, mc_oracle };

struct PriceResult {
    double value = 0.0;
    double abs_error_estimate = 0.0;
    PriceMethod method = PriceMethod::closed_form;
    std::map<std::string, double> diagnostics;
};

const char* to_string(OptionKind kind) noexcept;
const char* to_string(PriceMethod method) noexcept;

double norm_cdf(double x) noexcept;

// Closed-form Black-Scholes value without validation; the hot path for
// mixtures and series.
double bs_value(OptionKind kind, double s0, double strike, double maturity, double rho,
                double sigma) noexcept;

PriceResult bs_price(const OptionSpec& opt, double s0, double rho, double sigma);

// Mean-correction drift mu = -sigma^2/2 - lambda*(exp(delta^2/2 + m) - 1).
double mc_drift(const MertonTheta& theta, double sigma) noexcept;

// strike_shift: sum_n Pois(n; lambda*T) * BS(K - n*m, sqrt(sigma^2 + n*delta^2/T)).
// classical:    the conditional-lognormal decomposition, spot scaled per jump count.
enum class SeriesForm { strike_shift, classical };

struct SeriesEvaluation {
    double value = 0.0;
    double tail_bound = 0.0;  // Poisson tail mass times max(s0, K)
    long terms = 0;
    long bad_term = -1;  // first retained term with K - n*m <= 0, or -1
    double bad_strike = 0.0;
};

// Non-throwing series kernel shared by merton_mc_price and the posterior mixture.
SeriesEvaluation merton_series(OptionKind kind, double s0, double strike, double maturity,
                               double rho, double sigma, const MertonTheta& theta,
                               double series_tol, SeriesForm form) noexcept;

PriceResult merton_mc_price(const OptionSpec& opt, double s0, double rho, double sigma,
                            const MertonTheta& theta, double series_tol,
                            SeriesForm form = SeriesForm::strike_shift);

// Monte-Carlo price under the mean-corrected measure:
// X_T = (rho + mu)T + sigma*W_T + sum of N(m, delta^2) jumps.  Paths are
// grouped into fixed blocks of kOracleBlock with streams derive_seed(seed, b),
// so the value does not depend on the thread count.  A call with strike 0
// prices the forward S_T.
inline constexpr std::size_t kOracleBlock = 1 << 14;

PriceResult mc_oracle_price(const OptionSpec& opt, double s0, double rho, double sigma,
                            const MertonTheta& theta, std::size_t n_paths, std::uint64_t seed,
                            Exec exec = Exec::parallel);

namespace detail {
// Test hook for the self-test's fault injection: adds `offset` to norm_cdf.
void set_norm_cdf_fault(double offset) noexcept;
}  // namespace detail

}  // namespace bq
