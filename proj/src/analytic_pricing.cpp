#include "bq/analytic_pricing.hpp"

#include <omp.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <vector>

#include "bq/errors.hpp"
#include "bq/rng.hpp"

namespace bq {

namespace {

std::atomic<double> g_norm_cdf_fault{0.0};

constexpr long kMaxSeriesTerms = 100000;

}  // namespace

namespace detail {
void set_norm_cdf_fault(double offset) noexcept { g_norm_cdf_fault.store(offset); }
}  // namespace detail

void OptionSpec::validate() const {
    require(strike > 0.0 && std::isfinite(strike), ErrorKind::invalid_input, "strike must be > 0");
    require(maturity > 0.0 && std::isfinite(maturity), ErrorKind::invalid_input,
            "maturity must be > 0");
}

const char* to_string(OptionKind kind) noexcept { return kind == OptionKind::call ? "call" : "put"; }

const char* to_string(PriceMethod method) noexcept {
    switch (method) {
        case PriceMethod::closed_form: return "closed_form";
        case PriceMethod::series: return "series";
        case PriceMethod::quadrature: return "quadrature";
        case PriceMethod::posterior_mc: return "posterior_mc";
        case PriceMethod::mc_oracle: return "mc_oracle";
    }
    return "unknown";
}

double norm_cdf(double x) noexcept {
    return 0.5 * std::erfc(-x / std::numbers::sqrt2) + g_norm_cdf_fault.load(std::memory_order_relaxed);
}

double bs_value(OptionKind kind, double s0, double strike, double maturity, double rho,
                double sigma) noexcept {
    const double sd = sigma * std::sqrt(maturity);
    const double disc_k = strike * std::exp(-rho * maturity);
    const double d1 = (std::log(s0 / strike) + (rho + 0.5 * sigma * sigma) * maturity) / sd;
    const double d2 = d1 - sd;
    if (kind == OptionKind::call) {
        return std::max(0.0, s0 * norm_cdf(d1) - disc_k * norm_cdf(d2));
    }
    return std::max(0.0, disc_k * norm_cdf(-d2) - s0 * norm_cdf(-d1));
}

PriceResult bs_price(const OptionSpec& opt, double s0, double rho, double sigma) {
    opt.validate();
    require(s0 > 0.0 && std::isfinite(s0), ErrorKind::invalid_input, "s0 must be > 0");
    require(sigma > 0.0 && std::isfinite(sigma), ErrorKind::invalid_input, "sigma must be > 0");
    PriceResult r;
    r.method = PriceMethod::closed_form;
    r.value = bs_value(opt.kind, s0, opt.strike, opt.maturity, rho, sigma);
    // erfc is accurate to a few ulp; the two-term difference loses at most
    // the magnitude of the larger term.
    r.abs_error_estimate = std::min(1e-10, 8.0 * 0x1.0p-52 * std::max(s0, opt.strike));
    return r;
}

double mc_drift(const MertonTheta& theta, double sigma) noexcept {
    return -0.5 * sigma * sigma - theta.lambda * std::expm1(0.5 * theta.delta_sq + theta.m);
}

SeriesEvaluation merton_series(OptionKind kind, double s0, double strike, double maturity,
                               double rho, double sigma, const MertonTheta& theta,
                               double series_tol, SeriesForm form) noexcept {
    SeriesEvaluation ev;
    const double mean = theta.lambda * maturity;
    const double bound = std::max(s0, strike);
    const double log_mean = mean > 0.0 ? std::log(mean) : 0.0;
    const double kappa = std::expm1(theta.m + 0.5 * theta.delta_sq);
    double log_pmf = -mean;
    double sum = 0.0;
    for (long n = 0; n < kMaxSeriesTerms; ++n) {
        if (n > 0) {
            if (mean == 0.0) break;
            log_pmf += log_mean - std::log(static_cast<double>(n));
        }
        const double weight = std::exp(log_pmf);
        const double nd = static_cast<double>(n);
        const double vol = std::sqrt(sigma * sigma + nd * theta.delta_sq / maturity);
        double term = 0.0;
        if (form == SeriesForm::strike_shift) {
            const double k_n = strike - nd * theta.m;
            if (k_n <= 0.0) {
                ev.bad_term = n;
                ev.bad_strike = k_n;
                ev.terms = n + 1;
                return ev;
            }
            term = bs_value(kind, s0, k_n, maturity, rho, vol);
        } else {
            const double spot = s0 * std::exp(nd * (theta.m + 0.5 * theta.delta_sq) - mean * kappa);
            term = bs_value(kind, spot, strike, maturity, rho, vol);
        }
        sum += weight * term;
        ev.terms = n + 1;
        // P(N > n) <= pmf(n+1) / (1 - mean/(n+2)) once n + 2 > mean.
        const double next = static_cast<double>(n + 2);
        if (next > mean) {
            const double pmf_next = std::exp(log_pmf + log_mean - std::log(nd + 1.0));
            const double tail = mean == 0.0 ? 0.0 : pmf_next / (1.0 - mean / next);
            if (tail * bound < series_tol) {
                ev.tail_bound = tail * bound;
                break;
            }
        }
    }
    ev.value = sum;
    return ev;
}

PriceResult merton_mc_price(const OptionSpec& opt, double s0, double rho, double sigma,
                            const MertonTheta& theta, double series_tol, SeriesForm form) {
    opt.validate();
    theta.validate_degenerate();
    require(s0 > 0.0, ErrorKind::invalid_input, "s0 must be > 0");
    require(sigma > 0.0, ErrorKind::invalid_input, "sigma must be > 0");
    require(series_tol > 0.0, ErrorKind::invalid_input, "series_tol must be > 0");
    const auto ev =
        merton_series(opt.kind, s0, opt.strike, opt.maturity, rho, sigma, theta, series_tol, form);
    if (ev.bad_term >= 0) throw SeriesDomainError(ev.bad_term, ev.bad_strike);
    require(ev.terms < kMaxSeriesTerms, ErrorKind::numerical, "Merton series did not converge");
    PriceResult r;
    r.method = PriceMethod::series;
    r.value = ev.value;
    r.abs_error_estimate = ev.tail_bound + 1e-12 * std::max(s0, opt.strike);
    r.diagnostics["terms"] = static_cast<double>(ev.terms);
    r.diagnostics["tail_bound"] = ev.tail_bound;
    r.diagnostics["form"] = form == SeriesForm::strike_shift ? 0.0 : 1.0;
    // Strike-shifted terms satisfy C_n - P_n = s0 - (K - n m) e^{-rho T}; summed
    // over the Poisson weights this leaves e^{-rho T} m lambda T.
    r.diagnostics["parity_defect"] = form == SeriesForm::strike_shift
                                         ? std::exp(-rho * opt.maturity) * theta.m *
                                               theta.lambda * opt.maturity
                                         : 0.0;
    return r;
}

PriceResult mc_oracle_price(const OptionSpec& opt, double s0, double rho, double sigma,
                            const MertonTheta& theta, std::size_t n_paths, std::uint64_t seed,
                            Exec exec) {
    require(opt.strike >= 0.0 && std::isfinite(opt.strike), ErrorKind::invalid_input,
            "strike must be >= 0");
    require(opt.maturity > 0.0, ErrorKind::invalid_input, "maturity must be > 0");
    require(s0 > 0.0, ErrorKind::invalid_input, "s0 must be > 0");
    require(sigma >= 0.0, ErrorKind::invalid_input, "sigma must be >= 0");
    theta.validate_degenerate();
    require(n_paths >= 10000, ErrorKind::invalid_input, "n_paths must be >= 10^4");

    const double T = opt.maturity;
    const double drift = (rho + mc_drift(theta, sigma)) * T;
    const double vol = sigma * std::sqrt(T);
    const double delta = std::sqrt(theta.delta_sq);
    const double disc = std::exp(-rho * T);
    const double jump_mean = theta.lambda * T;
    const std::size_t blocks = (n_paths + kOracleBlock - 1) / kOracleBlock;
    std::vector<RunningStats> partial(blocks);

    auto run_block = [&](std::size_t b) {
        rng::Xoshiro256 gen(rng::derive_seed(seed, b));
        const std::size_t begin = b * kOracleBlock;
        const std::size_t end = std::min(n_paths, begin + kOracleBlock);
        RunningStats st;
        for (std::size_t i = begin; i < end; ++i) {
            double x = drift + vol * gen.normal();
            if (jump_mean > 0.0) {
                const auto jumps = rng::poisson(gen, jump_mean);
                if (jumps > 0) {
                    const double nj = static_cast<double>(jumps);
                    x += nj * theta.m + delta * std::sqrt(nj) * gen.normal();
                }
            }
            const double st_price = s0 * std::exp(x);
            const double payoff = opt.kind == OptionKind::call
                                      ? std::max(st_price - opt.strike, 0.0)
                                      : std::max(opt.strike - st_price, 0.0);
            st.add(disc * payoff);
        }
        partial[b] = st;
    };

    if (exec == Exec::parallel) {
#pragma omp parallel for schedule(dynamic)
        for (std::size_t b = 0; b < blocks; ++b) run_block(b);
    } else {
        for (std::size_t b = 0; b < blocks; ++b) run_block(b);
    }

    RunningStats total;
    for (const auto& st : partial) total.merge(st);
    PriceResult r;
    r.method = PriceMethod::mc_oracle;
    r.value = total.mean;
    r.abs_error_estimate = 3.0 * total.stderr_of_mean();
    r.diagnostics["n_paths"] = static_cast<double>(n_paths);
    r.diagnostics["stderr"] = total.stderr_of_mean();
    r.diagnostics["blocks"] = static_cast<double>(blocks);
    return r;
}

}  // namespace bq
