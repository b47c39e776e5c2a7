#include "bq/bayes_engine.hpp"

#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "bq/errors.hpp"

namespace bq {

const char* to_string(PriorKind kind) noexcept {
    return kind == PriorKind::noninformative_unit ? "noninformative_unit" : "custom";
}

std::vector<double> log_returns(const ObservationSeries& series, double rho) {
    require(series.size() >= 3, ErrorKind::invalid_input,
            "need at least 3 quotes (n >= 2 increments)");
    series.validate();
    std::vector<double> x(series.size() - 1);
    for (std::size_t j = 0; j + 1 < series.size(); ++j) {
        const double dt = series.times[j + 1] - series.times[j];
        x[j] = (std::log(series.quotes[j + 1] / series.quotes[j]) - rho * dt) / std::sqrt(dt);
    }
    return x;
}

// ---------------------------------------------------------------------------
// Black-Scholes variance posterior

BsPosterior BsPosterior::from_statistics(std::size_t n, double sigma_hat_sq, VariancePrior prior) {
    require(n >= 2, ErrorKind::invalid_input, "posterior needs n >= 2 increments");
    require(std::isfinite(sigma_hat_sq), ErrorKind::invalid_input, "sigma_hat_sq must be finite");
    require(sigma_hat_sq > 0.0, ErrorKind::degenerate_data,
            "all normalized increments are zero (sigma_hat^2 = 0)");
    require(static_cast<bool>(prior.log_density), ErrorKind::invalid_input, "prior has no density");
    if (prior.kind == PriorKind::noninformative_unit) {
        require(n >= 3, ErrorKind::invalid_input,
                "unit prior gives an improper posterior for n = 2; need n >= 3");
    }
    BsPosterior post;
    post.n_ = n;
    post.sigma_hat_sq_ = sigma_hat_sq;
    post.prior_ = std::move(prior);

    // Reference level: best kernel value on a wide log grid around sigma_hat^2.
    double ref = -kInf;
    for (int i = 0; i <= 256; ++i) {
        const double v = sigma_hat_sq * std::exp(-14.0 + 28.0 * i / 256.0);
        ref = std::max(ref, post.log_kernel(v));
    }
    require(std::isfinite(ref), ErrorKind::degenerate_prior,
            "prior has no mass near the variance estimate");
    const double drop = std::log(1e12);
    double c = 2.0;
    while (c < 1e100) {
        const bool lo_ok = post.log_kernel(sigma_hat_sq / c) < ref - drop;
        const bool hi_ok = post.log_kernel(sigma_hat_sq * c) < ref - drop;
        if (lo_ok && hi_ok) break;
        c *= 2.0;
    }
    post.scout_ = Bracket{sigma_hat_sq / c, sigma_hat_sq * c};

    LogDensityOptions opts;
    opts.scout = post.scout_;
    opts.z_rel_tol = 1e-10;
    const auto z = integrate_log_density([&post](double v) { return post.log_kernel(v); }, {},
                                         Bracket{0.0, kInf}, 1e-10, opts);
    require(z.converged && z.z_rel_error <= 1e-8, ErrorKind::numerical,
            "posterior normalization did not reach rel. tol 1e-8 (estimate " +
                std::to_string(z.z_rel_error) + ")");
    post.log_norm_ = z.log_z;
    post.norm_rel_error_ = z.z_rel_error;
    if (post.prior_.kind == PriorKind::custom) post.build_sampling_table();
    return post;
}

double BsPosterior::log_kernel(double v) const {
    if (!(v > 0.0) || !std::isfinite(v)) return -kInf;
    const double nd = static_cast<double>(n_);
    const double lp = prior_(v);
    if (std::isnan(lp) || lp == -kInf) return -kInf;
    // -(n/2)(log v + s/v) minus its maximum -(n/2)(1 + log s); written as
    // x - 1 - log x with x = s/v so large n does not cost n ulps.
    const double u = sigma_hat_sq_ / v - 1.0;
    return -0.5 * nd * (u - std::log1p(u)) + lp;
}

double BsPosterior::log_density(double v) const { return log_kernel(v) - log_norm_; }

double BsPosterior::density(double v) const { return std::exp(log_density(v)); }

void BsPosterior::build_sampling_table() {
    // Extend the scouting range until the mass per log-unit is negligible.
    auto log_mass = [this](double y) { return log_kernel(std::exp(y)) + y; };
    double y_lo = std::log(scout_.lo);
    double y_hi = std::log(scout_.hi);
    double ref = -kInf;
    for (int i = 0; i <= 512; ++i) ref = std::max(ref, log_mass(y_lo + (y_hi - y_lo) * i / 512.0));
    const double drop = std::log(1e14);
    for (int it = 0; it < 200 && log_mass(y_lo) > ref - drop; ++it) y_lo -= 1.0;
    for (int it = 0; it < 200 && log_mass(y_hi) > ref - drop; ++it) y_hi += 1.0;

    const std::size_t cells = sampling_grid_size;
    std::vector<double> ys(cells + 1);
    std::vector<double> cdf(cells + 1, 0.0);
    std::vector<double> p(cells + 1);
    for (std::size_t i = 0; i <= cells; ++i) {
        ys[i] = y_lo + (y_hi - y_lo) * static_cast<double>(i) / static_cast<double>(cells);
        p[i] = std::exp(log_mass(ys[i]) - ref);
    }
    for (std::size_t i = 1; i <= cells; ++i) {
        cdf[i] = cdf[i - 1] + 0.5 * (p[i] + p[i - 1]) * (ys[i] - ys[i - 1]);
    }
    require(cdf.back() > 0.0, ErrorKind::degenerate_prior, "posterior has no mass on the grid");
    for (double& c : cdf) c /= cdf.back();
    table_x_ = std::make_shared<const std::vector<double>>(std::move(ys));
    table_cdf_ = std::make_shared<const std::vector<double>>(std::move(cdf));
}

double BsPosterior::draw(rng::Xoshiro256& gen) const {
    if (prior_.kind == PriorKind::noninformative_unit) {
        const double nd = static_cast<double>(n_);
        const double shape = 0.5 * nd - 1.0;
        const double scale = 0.5 * nd * sigma_hat_sq_;
        return scale / rng::gamma(gen, shape);
    }
    const auto& ys = *table_x_;
    const auto& cdf = *table_cdf_;
    const double u = gen.uniform_open();
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    std::size_t i = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(it - cdf.begin(), 1,
                                                                       static_cast<std::ptrdiff_t>(cdf.size() - 1)));
    const double span = cdf[i] - cdf[i - 1];
    const double frac = span > 0.0 ? (u - cdf[i - 1]) / span : 0.5;
    return std::exp(ys[i - 1] + frac * (ys[i] - ys[i - 1]));
}

std::vector<double> BsPosterior::sample(std::size_t count, std::uint64_t seed) const {
    std::vector<double> out(count);
    for (std::size_t i = 0; i < count; ++i) {
        rng::Xoshiro256 gen(rng::derive_seed(seed, i));
        out[i] = draw(gen);
    }
    return out;
}

LogDensityIntegral BsPosterior::expectation(const RealFn& g, double tol) const {
    LogDensityOptions opts;
    opts.scout = scout_;
    opts.z_rel_tol = 1e-3;
    return integrate_log_density([this](double v) { return log_kernel(v); }, g, Bracket{0.0, kInf},
                                 tol, opts);
}

BsPosterior fit_bs_posterior(const ObservationSeries& series, double rho, VariancePrior prior) {
    const auto x = log_returns(series, rho);
    double ss = 0.0;
    for (double v : x) ss += v * v;
    return BsPosterior::from_statistics(x.size(), ss / static_cast<double>(x.size()),
                                        std::move(prior));
}

PriceResult subjective_bs_price(const OptionSpec& opt, double s0, double rho,
                                const BsPosterior& post, double tol) {
    opt.validate();
    require(s0 > 0.0, ErrorKind::invalid_input, "s0 must be > 0");
    require(tol > 0.0, ErrorKind::invalid_input, "tol must be > 0");
    const auto r = post.expectation(
        [&](double v) {
            return bs_value(opt.kind, s0, opt.strike, opt.maturity, rho, std::sqrt(v));
        },
        tol);
    if (!r.converged || !(r.ratio_error <= tol)) {
        fail(ErrorKind::numerical, "posterior-mixture quadrature did not converge (error " +
                                       std::to_string(r.ratio_error) + ", evaluations " +
                                       std::to_string(r.evaluations) + ")");
    }
    PriceResult out;
    out.method = PriceMethod::quadrature;
    out.value = r.ratio;
    out.abs_error_estimate = r.ratio_error;
    out.diagnostics["evaluations"] = static_cast<double>(r.evaluations);
    out.diagnostics["posterior_mode"] = r.mode;
    out.diagnostics["n"] = static_cast<double>(post.n());
    return out;
}

// ---------------------------------------------------------------------------
// Merton jump-parameter posterior

namespace {

double normal_quantile(double p) { return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p); }

}  // namespace

MertonPosterior MertonPosterior::from_statistics(std::size_t n_jumps, double tau, double m_hat,
                                                 double delta_hat_sq, ThetaPrior prior) {
    require(n_jumps >= kMinJumps, ErrorKind::insufficient_jumps,
            "N = " + std::to_string(n_jumps) + " jumps; the posterior is proper only for N >= " +
                std::to_string(kMinJumps));
    require(tau > 0.0 && std::isfinite(tau), ErrorKind::invalid_input, "tau must be > 0");
    require(std::isfinite(m_hat) && std::isfinite(delta_hat_sq), ErrorKind::invalid_input,
            "jump statistics must be finite");
    require(delta_hat_sq > 0.0, ErrorKind::degenerate_data, "all jump heights are equal");
    require(static_cast<bool>(prior.log_density), ErrorKind::invalid_input, "prior has no density");

    MertonPosterior post;
    post.n_jumps_ = n_jumps;
    post.tau_ = tau;
    post.m_hat_ = m_hat;
    post.delta_hat_sq_ = delta_hat_sq;
    post.prior_ = std::move(prior);

    const double nd = static_cast<double>(n_jumps);
    const double shape = 0.5 * (nd - 3.0);
    const double scale = 0.5 * nd * delta_hat_sq;
    post.log_norm_ = std::lgamma(nd + 1.0) - (nd + 1.0) * std::log(tau) + std::lgamma(shape) -
                     shape * std::log(scale) + 0.5 * std::log(2.0 * std::numbers::pi / nd);

    if (post.prior_.kind == PriorKind::noninformative_unit) {
        // (delta^2, m) factor by nested quadrature; used for the lambda-marginal.
        auto inner = [&](double v) {
            const double w = std::sqrt(v / nd);
            const std::array<double, 5> bp{-kInf, m_hat - 8.0 * w, m_hat, m_hat + 8.0 * w, kInf};
            const auto r = integrate_adaptive(
                [&](double m) {
                    const double z = (m - m_hat) / w;
                    return std::exp(-0.5 * z * z);
                },
                bp, 1e-300, 1e-12);
            return std::log(r.value);
        };
        auto log_f = [&](double v) {
            if (!(v > 0.0)) return -kInf;
            return -0.5 * nd * std::log(v) - 0.5 * nd * delta_hat_sq / v + inner(v);
        };
        LogDensityOptions opts;
        opts.scout = Bracket{delta_hat_sq * 1e-6, delta_hat_sq * 1e8};
        opts.z_rel_tol = 1e-11;
        const auto z = integrate_log_density(log_f, {}, Bracket{0.0, kInf}, 1e-11, opts);
        require(z.converged, ErrorKind::numerical, "jump-factor quadrature did not converge");
        post.log_jump_factor_ = z.log_z;
    } else {
        post.build_custom_grid();
    }
    return post;
}

MertonPosterior MertonPosterior::fit(const JumpRecord& record, ThetaPrior prior) {
    record.validate();
    const std::size_t n = record.count();
    require(n >= 2, ErrorKind::insufficient_jumps,
            "N = " + std::to_string(n) + " jumps; need at least 2");
    const double nd = static_cast<double>(n);
    const double m_hat = pairwise_sum(record.jump_sizes) / nd;
    double ss = 0.0;
    for (double y : record.jump_sizes) ss += (y - m_hat) * (y - m_hat);
    return from_statistics(n, record.tau, m_hat, ss / nd, std::move(prior));
}

double MertonPosterior::log_kernel(const MertonTheta& t) const {
    if (!(t.lambda > 0.0) || !(t.delta_sq > 0.0) || !std::isfinite(t.m)) return -kInf;
    const double lp = prior_(t);
    if (std::isnan(lp) || lp == -kInf) return -kInf;
    const double nd = static_cast<double>(n_jumps_);
    const double dm = m_hat_ - t.m;
    return -tau_ * t.lambda + nd * std::log(t.lambda) - 0.5 * nd * std::log(t.delta_sq) -
           0.5 * nd * (delta_hat_sq_ + dm * dm) / t.delta_sq + lp;
}

double MertonPosterior::log_density(const MertonTheta& t) const { return log_kernel(t) - log_norm_; }

double MertonPosterior::lambda_marginal_density(double lambda) const {
    require(prior_.kind == PriorKind::noninformative_unit, ErrorKind::invalid_input,
            "lambda-marginal is only available for the unit prior");
    if (!(lambda > 0.0)) return 0.0;
    const double nd = static_cast<double>(n_jumps_);
    return std::exp(-tau_ * lambda + nd * std::log(lambda) + log_jump_factor_ - log_norm_);
}

MertonTheta MertonPosterior::from_quantiles(double u_lambda, double u_delta, double u_m) const {
    const double nd = static_cast<double>(n_jumps_);
    const double shape = 0.5 * (nd - 3.0);
    const double scale = 0.5 * nd * delta_hat_sq_;
    MertonTheta t;
    t.lambda = boost::math::gamma_p_inv(nd + 1.0, u_lambda) / tau_;
    t.delta_sq = scale / boost::math::gamma_q_inv(shape, u_delta);
    t.m = m_hat_ + std::sqrt(t.delta_sq / nd) * normal_quantile(u_m);
    return t;
}

void MertonPosterior::build_custom_grid() {
    constexpr std::size_t g = kThetaGrid;
    std::vector<double> logw(g * g * g);
    double top = -kInf;
    for (std::size_t i = 0; i < g; ++i) {
        for (std::size_t j = 0; j < g; ++j) {
            for (std::size_t k = 0; k < g; ++k) {
                const auto theta = from_quantiles((i + 0.5) / g, (j + 0.5) / g, (k + 0.5) / g);
                double lw = prior_(theta);
                if (std::isnan(lw)) lw = -kInf;
                logw[(i * g + j) * g + k] = lw;
                top = std::max(top, lw);
            }
        }
    }
    require(std::isfinite(top), ErrorKind::degenerate_prior,
            "custom prior has no mass on the posterior grid");
    std::vector<double> cdf(logw.size());
    double acc = 0.0;
    for (std::size_t c = 0; c < logw.size(); ++c) {
        acc += std::exp(logw[c] - top);
        cdf[c] = acc;
    }
    for (double& v : cdf) v /= acc;
    log_norm_ += top + std::log(acc / static_cast<double>(logw.size()));
    cell_cdf_ = std::make_shared<const std::vector<double>>(std::move(cdf));
}

MertonTheta MertonPosterior::draw(rng::Xoshiro256& gen) const {
    const double nd = static_cast<double>(n_jumps_);
    if (prior_.kind == PriorKind::noninformative_unit) {
        MertonTheta t;
        t.lambda = rng::gamma(gen, nd + 1.0) / tau_;
        t.delta_sq = 0.5 * nd * delta_hat_sq_ / rng::gamma(gen, 0.5 * (nd - 3.0));
        t.m = m_hat_ + std::sqrt(t.delta_sq / nd) * gen.normal();
        return t;
    }
    constexpr std::size_t g = kThetaGrid;
    const auto& cdf = *cell_cdf_;
    const double u = gen.uniform();
    const auto cell = static_cast<std::size_t>(
        std::min<std::ptrdiff_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin(),
                                 static_cast<std::ptrdiff_t>(cdf.size() - 1)));
    const std::size_t i = cell / (g * g);
    const std::size_t j = (cell / g) % g;
    const std::size_t k = cell % g;
    // Jitter inside the cell; a cell straddling the prior's support edge keeps
    // its draws on the supported side (falling back to the centre).
    for (int attempt = 0; attempt < 64; ++attempt) {
        const double ul = (static_cast<double>(i) + gen.uniform_open()) / g;
        const double ud = (static_cast<double>(j) + gen.uniform_open()) / g;
        const double um = (static_cast<double>(k) + gen.uniform_open()) / g;
        const auto theta = from_quantiles(ul, ud, um);
        const double lp = prior_(theta);
        if (!std::isnan(lp) && lp > -kInf) return theta;
    }
    return from_quantiles((i + 0.5) / g, (j + 0.5) / g, (k + 0.5) / g);
}

std::vector<MertonTheta> MertonPosterior::sample(std::size_t count, std::uint64_t seed) const {
    require(count >= 1, ErrorKind::invalid_input, "sample count must be >= 1");
    std::vector<MertonTheta> out(count);
    const auto n = static_cast<std::ptrdiff_t>(count);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        rng::Xoshiro256 gen(rng::derive_seed(seed, static_cast<std::uint64_t>(i)));
        out[static_cast<std::size_t>(i)] = draw(gen);
    }
    return out;
}

MertonPosterior fit_merton_posterior(const JumpRecord& record, ThetaPrior prior) {
    return MertonPosterior::fit(record, std::move(prior));
}

std::vector<MertonTheta> sample_merton_posterior(const MertonPosterior& post, std::size_t count,
                                                 std::uint64_t seed) {
    return post.sample(count, seed);
}

MixtureValues evaluate_merton_mixture(std::span<const MertonTheta> thetas, const OptionSpec& opt,
                                      double s0, double rho, double sigma, double series_tol,
                                      Exec exec) {
    opt.validate();
    require(s0 > 0.0 && sigma > 0.0, ErrorKind::invalid_input, "s0 and sigma must be > 0");
    require(series_tol > 0.0, ErrorKind::invalid_input, "series_tol must be > 0");
    MixtureValues out;
    out.values.resize(thetas.size());
    const auto n = static_cast<std::ptrdiff_t>(thetas.size());
    auto one = [&](std::ptrdiff_t i) {
        const auto ev = merton_series(opt.kind, s0, opt.strike, opt.maturity, rho, sigma,
                                      thetas[static_cast<std::size_t>(i)], series_tol,
                                      SeriesForm::strike_shift);
        out.values[static_cast<std::size_t>(i)] =
            ev.bad_term >= 0 ? std::numeric_limits<double>::quiet_NaN() : ev.value;
    };
    if (exec == Exec::parallel) {
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t i = 0; i < n; ++i) one(i);
    } else {
        for (std::ptrdiff_t i = 0; i < n; ++i) one(i);
    }
    out.rejected = static_cast<std::size_t>(
        std::count_if(out.values.begin(), out.values.end(), [](double v) { return std::isnan(v); }));
    return out;
}

PriceResult subjective_merton_price(const OptionSpec& opt, double s0, double rho, double sigma,
                                    const MertonPosterior& post, std::size_t n_samples,
                                    std::uint64_t seed, double series_tol, Exec exec) {
    require(n_samples >= 1000, ErrorKind::invalid_input, "n_samples must be >= 10^3");
    const auto thetas = post.sample(n_samples, seed);
    const auto mix = evaluate_merton_mixture(thetas, opt, s0, rho, sigma, series_tol, exec);
    if (static_cast<double>(mix.rejected) > 0.01 * static_cast<double>(n_samples)) {
        throw ReliabilityError(mix.rejected, n_samples);
    }
    std::vector<double> kept;
    kept.reserve(n_samples - mix.rejected);
    for (double v : mix.values) {
        if (!std::isnan(v)) kept.push_back(v);
    }
    const double k = static_cast<double>(kept.size());
    const double mean = pairwise_sum(kept) / k;
    std::vector<double> sq(kept.size());
    for (std::size_t i = 0; i < kept.size(); ++i) sq[i] = (kept[i] - mean) * (kept[i] - mean);
    const double var = kept.size() > 1 ? pairwise_sum(sq) / (k - 1.0) : 0.0;
    const double se = std::sqrt(var / k);

    PriceResult r;
    r.method = PriceMethod::posterior_mc;
    r.value = mean;
    r.abs_error_estimate = 3.0 * se + series_tol;
    r.diagnostics["n_samples"] = static_cast<double>(n_samples);
    r.diagnostics["rejected"] = static_cast<double>(mix.rejected);
    r.diagnostics["stderr"] = se;
    return r;
}

}  // namespace bq
