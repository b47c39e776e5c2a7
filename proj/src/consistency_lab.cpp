#include "bq/consistency_lab.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "bq/errors.hpp"
#include "bq/market_sim.hpp"
#include "bq/rng.hpp"

namespace bq {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double median_of(std::vector<double> v) {
    std::erase_if(v, [](double x) { return std::isnan(x); });
    if (v.empty()) return kNaN;
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    const double hi = v[mid];
    if (v.size() % 2 == 1) return hi;
    const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lo + hi);
}

template <class Body>
void for_each_index(std::size_t count, Exec exec, Body&& body) {
    const auto n = static_cast<std::ptrdiff_t>(count);
    if (exec == Exec::parallel) {
#pragma omp parallel for schedule(dynamic)
        for (std::ptrdiff_t i = 0; i < n; ++i) body(static_cast<std::size_t>(i));
    } else {
        for (std::ptrdiff_t i = 0; i < n; ++i) body(static_cast<std::size_t>(i));
    }
}

// Fixed blocks with per-block streams, merged in block order.
template <class PathFn>
RunningStats block_mean(std::size_t n_mc, std::uint64_t seed, Exec exec, PathFn&& path) {
    const std::size_t blocks = (n_mc + kMartingaleBlock - 1) / kMartingaleBlock;
    std::vector<RunningStats> stats(blocks);
    for_each_index(blocks, exec, [&](std::size_t b) {
        rng::Xoshiro256 gen(rng::derive_seed(seed, b));
        const std::size_t begin = b * kMartingaleBlock;
        const std::size_t end = std::min(n_mc, begin + kMartingaleBlock);
        RunningStats s;
        for (std::size_t i = begin; i < end; ++i) s.add(path(gen));
        stats[b] = s;
    });
    RunningStats total;
    for (const auto& s : stats) total.merge(s);
    return total;
}

MartingaleCheck finish(const RunningStats& st, double s0) {
    MartingaleCheck out;
    out.estimate = st.mean;
    out.std_error = st.stderr_of_mean();
    out.s0 = s0;
    out.pass = std::abs(out.estimate - s0) <= 3.0 * out.std_error;
    return out;
}

// Points marching towards an open end of the domain, away from theta0.
std::vector<double> towards_end(double theta0, double end, bool upper) {
    std::vector<double> pts;
    for (int k = 1; k <= 12; ++k) {
        const double f = std::pow(10.0, k);
        double x;
        if (std::isinf(end)) {
            const double scale = std::max(1.0, std::abs(theta0));
            x = upper ? theta0 + scale * f : theta0 - scale * f;
        } else {
            x = end + (theta0 - end) / f;
        }
        pts.push_back(x);
    }
    return pts;
}

}  // namespace

void SaddleProblem::validate() const {
    require(static_cast<bool>(h_n) && static_cast<bool>(h) && static_cast<bool>(g),
            ErrorKind::invalid_input, "saddle problem needs h_n, h and g");
    require(static_cast<bool>(prior.log_density), ErrorKind::invalid_input,
            "saddle problem prior has no density");
    require(domain.lo < domain.hi, ErrorKind::invalid_input, "saddle domain is empty");
    require(theta0 > domain.lo && theta0 < domain.hi, ErrorKind::invalid_input,
            "theta0 must lie inside the domain");
    require(prior_integrable || envelope_a.has_value(), ErrorKind::invalid_input,
            "a non-integrable prior needs an envelope a(theta)");

    // Grid check of the unique minimum: log-spaced on the positive half-line,
    // linear otherwise.
    constexpr int kPoints = 400;
    const bool log_grid = domain.lo >= 0.0 && std::isinf(domain.hi);
    double lo = domain.lo;
    double hi = domain.hi;
    if (log_grid) {
        lo = theta0 * 1e-3;
        hi = theta0 * 1e3;
    } else {
        const double span = std::max(1.0, std::abs(theta0)) * 100.0;
        if (std::isinf(lo)) lo = theta0 - span;
        if (std::isinf(hi)) hi = theta0 + span;
    }
    const double beta0 = h(theta0);
    require(std::isfinite(beta0), ErrorKind::invalid_input, "h(theta0) is not finite");
    double best = kInf;
    double best_x = theta0;
    double step = 0.0;
    std::vector<double> xs(kPoints + 1);
    for (int i = 0; i <= kPoints; ++i) {
        const double u = (i + 0.5) / (kPoints + 1.0);
        xs[static_cast<std::size_t>(i)] =
            log_grid ? lo * std::pow(hi / lo, u) : lo + (hi - lo) * u;
    }
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double v = h(xs[i]);
        require(v >= beta0 - 1e-12 * (1.0 + std::abs(beta0)), ErrorKind::invalid_input,
                "h falls below h(theta0) on the check grid; theta0 is not the minimum");
        if (v < best) {
            best = v;
            best_x = xs[i];
            step = i + 1 < xs.size() ? xs[i + 1] - xs[i] : xs[i] - xs[i - 1];
        }
    }
    require(std::abs(best_x - theta0) <= 1.01 * std::abs(step), ErrorKind::invalid_input,
            "grid minimum of h is not next to theta0");
}

double saddle_ratio(const SaddleProblem& prob, std::size_t n, double tol) {
    require(n >= 1, ErrorKind::invalid_input, "saddle_ratio needs n >= 1");
    require(tol > 0.0, ErrorKind::invalid_input, "tol must be > 0");
    const double nd = static_cast<double>(n);
    auto log_f = [&](double t) {
        const double lp = prob.prior(t);
        if (std::isnan(lp) || lp == -kInf) return -kInf;
        return -nd * prob.h_n(nd, t) + lp;
    };

    if (!prob.prior_integrable) {
        // The modified exponent n*h_n - a - log(pi) must grow towards every open
        // end, so exp(-n h_n) pi is dominated by exp(-a) there.
        const auto& a = *prob.envelope_a;
        auto tilde = [&](double t) { return -log_f(t) - a(t); };
        for (bool upper : {false, true}) {
            const double end = upper ? prob.domain.hi : prob.domain.lo;
            const auto pts = towards_end(prob.theta0, end, upper);
            double prev = tilde(pts.front());
            for (std::size_t k = 1; k < pts.size(); ++k) {
                const double cur = tilde(pts[k]);
                if (!(cur > prev)) {
                    fail(ErrorKind::domain,
                         "envelope condition fails for n = " + std::to_string(n) + " towards the " +
                             (upper ? "upper" : "lower") + " end of the domain");
                }
                prev = cur;
            }
            require(prev - tilde(pts.front()) >= 1.0, ErrorKind::domain,
                    "envelope condition fails for n = " + std::to_string(n) +
                        ": the modified exponent does not grow towards the domain end");
        }
    }

    LogDensityOptions opts;
    Bracket scout = prob.domain;
    if (std::isinf(scout.hi)) scout.hi = prob.domain.lo >= 0.0 ? prob.theta0 * 1e4 : prob.theta0 + 1e4;
    if (std::isinf(scout.lo)) scout.lo = prob.theta0 - 1e4;
    if (prob.domain.lo >= 0.0 && std::isinf(prob.domain.hi)) scout.lo = prob.theta0 * 1e-4;
    opts.scout = scout;
    opts.z_rel_tol = 1e-3;
    const auto r = integrate_log_density(log_f, prob.g, prob.domain, tol, opts);
    if (!r.converged) {
        fail(ErrorKind::numerical, "saddle ratio quadrature did not converge for n = " +
                                       std::to_string(n) + " (" + prob.name + ")");
    }
    return r.ratio;
}

ConvergenceTable saddle_convergence_check(const SaddleProblem& prob,
                                          std::span<const std::size_t> n_list, double tol) {
    prob.validate();
    const double ref = prob.g(prob.theta0);
    ConvergenceTable table;
    for (std::size_t n : n_list) {
        ConvergenceRow row;
        row.index = static_cast<double>(n);
        row.subjective = saddle_ratio(prob, n, tol);
        row.reference = ref;
        const double diff = std::abs(row.subjective - ref);
        row.rel_diff = ref != 0.0 ? diff / std::abs(ref) : diff;
        row.err = tol;
        table.rows.push_back(row);
    }
    table.validate();
    return table;
}

SaddleProblem quadratic_saddle_problem(std::function<double(double)> g) {
    SaddleProblem p;
    p.h_n = [](double, double t) { return 0.5 * (t - 1.0) * (t - 1.0); };
    p.h = [](double t) { return 0.5 * (t - 1.0) * (t - 1.0); };
    p.g = std::move(g);
    p.prior = VariancePrior::noninformative();
    p.prior_integrable = true;
    p.theta0 = 1.0;
    p.domain = Bracket{0.0, 2.0};
    p.name = "quadratic";
    return p;
}

SaddleProblem bs_saddle_problem(double sigma0_sq, std::function<double(double n)> sigma_hat_sq,
                                std::function<double(double)> g) {
    require(sigma0_sq > 0.0, ErrorKind::invalid_input, "sigma0^2 must be > 0");
    require(static_cast<bool>(sigma_hat_sq), ErrorKind::invalid_input, "sigma_hat_sq is empty");
    // (s/v + log v)/2 minus its minimum (1 + log s)/2.  The ratio is invariant
    // under the shift, and n*h_n no longer loses n ulps to cancellation.
    auto shifted = [](double s, double v) {
        const double u = s / v - 1.0;
        return 0.5 * (u - std::log1p(u));
    };
    SaddleProblem p;
    p.h_n = [s = std::move(sigma_hat_sq), shifted](double n, double v) { return shifted(s(n), v); };
    p.h = [sigma0_sq, shifted](double v) { return shifted(sigma0_sq, v); };
    p.g = std::move(g);
    p.prior = VariancePrior::noninformative();
    p.prior_integrable = false;
    p.envelope_a = [](double v) { return v > 1.0 ? 2.0 * std::log(v) : 0.0; };
    p.theta0 = sigma0_sq;
    p.domain = Bracket{0.0, kInf};
    p.name = "bs";
    return p;
}

void ConvergenceTable::validate() const {
    for (std::size_t i = 1; i < rows.size(); ++i) {
        require(rows[i].index > rows[i - 1].index, ErrorKind::invalid_input,
                "convergence table indices must be strictly increasing");
    }
}

double ConvergenceTable::trend() const {
    std::size_t pairs = 0;
    std::size_t down = 0;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const double a = std::abs(rows[i - 1].subjective - rows[i - 1].reference);
        const double b = std::abs(rows[i].subjective - rows[i].reference);
        if (std::isnan(a) || std::isnan(b)) continue;
        ++pairs;
        if (b < a) ++down;
    }
    return pairs == 0 ? kNaN : static_cast<double>(down) / static_cast<double>(pairs);
}

bool ConvergenceTable::last_strictly_decreasing(std::size_t count) const {
    if (count < 2 || rows.size() < count) return false;
    for (std::size_t i = rows.size() - count + 1; i < rows.size(); ++i) {
        const double a = std::abs(rows[i - 1].subjective - rows[i - 1].reference);
        const double b = std::abs(rows[i].subjective - rows[i].reference);
        if (!(b < a)) return false;
    }
    return true;
}

MartingaleCheck martingale_check_bs(const BsPosterior& post, double s0, double rho, double maturity,
                                    std::size_t n_mc, std::uint64_t seed, Exec exec) {
    require(n_mc >= 10000, ErrorKind::invalid_input, "n_mc must be >= 10^4");
    require(s0 > 0.0 && maturity > 0.0, ErrorKind::invalid_input, "s0 and maturity must be > 0");
    (void)rho;  // e^{-rho T} cancels against the risk-free drift
    const auto st = block_mean(n_mc, seed, exec, [&](rng::Xoshiro256& gen) {
        const double v = post.draw(gen);
        const double z = gen.normal();
        return s0 * std::exp(-0.5 * v * maturity + std::sqrt(v * maturity) * z);
    });
    return finish(st, s0);
}

MartingaleCheck martingale_check_merton(const MertonPosterior& post, double s0, double rho,
                                        double sigma, double maturity, std::size_t n_mc,
                                        std::uint64_t seed, Exec exec) {
    require(n_mc >= 10000, ErrorKind::invalid_input, "n_mc must be >= 10^4");
    require(s0 > 0.0 && maturity > 0.0 && sigma > 0.0, ErrorKind::invalid_input,
            "s0, sigma and maturity must be > 0");
    (void)rho;
    const double sd = sigma * std::sqrt(maturity);
    const auto st = block_mean(n_mc, seed, exec, [&](rng::Xoshiro256& gen) {
        const MertonTheta theta = post.draw(gen);
        const double z = gen.normal();
        const auto jumps = static_cast<double>(rng::poisson(gen, theta.lambda * maturity));
        double x = mc_drift(theta, sigma) * maturity + sd * z;
        if (jumps > 0.0) x += jumps * theta.m + std::sqrt(theta.delta_sq * jumps) * gen.normal();
        return s0 * std::exp(x);
    });
    return finish(st, s0);
}

ConvergenceTable bs_convergence_experiment(const BsExperiment& preset,
                                           std::span<const std::size_t> n_list,
                                           std::span<const std::uint64_t> seeds, Exec exec) {
    require(!n_list.empty() && !seeds.empty(), ErrorKind::invalid_input,
            "n_list and seeds must be nonempty");
    require(n_list.front() >= 2, ErrorKind::invalid_input, "n values must be >= 2");
    for (std::size_t i = 1; i < n_list.size(); ++i) {
        require(n_list[i] > n_list[i - 1], ErrorKind::invalid_input, "n_list must be increasing");
    }
    require(preset.dt > 0.0, ErrorKind::invalid_input, "dt must be > 0");
    const BsParams params{preset.s0, preset.rho, preset.sigma0};
    params.validate();
    const OptionSpec opt{OptionKind::call, preset.strike, preset.maturity};
    opt.validate();
    const double ref = bs_price(opt, preset.s0, preset.rho, preset.sigma0).value;

    const std::size_t n_max = n_list.back();
    std::vector<double> grid(n_max + 1);
    for (std::size_t j = 0; j <= n_max; ++j) {
        grid[j] = -static_cast<double>(n_max - j) * preset.dt;
    }

    const std::size_t cols = n_list.size();
    std::vector<double> price(seeds.size() * cols, kNaN);
    std::vector<double> rel(seeds.size() * cols, kNaN);
    std::vector<double> err(seeds.size() * cols, kNaN);
    for_each_index(seeds.size(), exec, [&](std::size_t s) {
        const auto full = simulate_bs_path(params, grid, seeds[s]);
        for (std::size_t c = 0; c < cols; ++c) {
            const std::size_t first = n_max - n_list[c];
            ObservationSeries win;
            win.times.assign(full.times.begin() + static_cast<std::ptrdiff_t>(first),
                             full.times.end());
            win.quotes.assign(full.quotes.begin() + static_cast<std::ptrdiff_t>(first),
                              full.quotes.end());
            try {
                const auto post = fit_bs_posterior(win, preset.rho, preset.prior);
                const auto r = subjective_bs_price(opt, preset.s0, preset.rho, post, preset.quad_tol);
                price[s * cols + c] = r.value;
                rel[s * cols + c] = std::abs(r.value - ref) / ref;
                err[s * cols + c] = r.abs_error_estimate;
            } catch (const Error&) {
                // counted as skipped below
            }
        }
    });

    ConvergenceTable table;
    for (std::size_t c = 0; c < cols; ++c) {
        std::vector<double> p, r, e;
        std::size_t skipped = 0;
        for (std::size_t s = 0; s < seeds.size(); ++s) {
            const std::size_t k = s * cols + c;
            if (std::isnan(price[k])) {
                ++skipped;
                continue;
            }
            p.push_back(price[k]);
            r.push_back(rel[k]);
            e.push_back(err[k]);
        }
        ConvergenceRow row;
        row.index = static_cast<double>(n_list[c]);
        row.subjective = median_of(p);
        row.reference = ref;
        row.rel_diff = median_of(r);
        row.err = e.empty() ? kNaN : *std::max_element(e.begin(), e.end());
        row.skipped = skipped;
        table.rows.push_back(row);
    }
    return table;
}

namespace {

std::uint64_t posterior_seed(std::uint64_t history_seed) { return rng::derive_seed(history_seed, 2); }

}  // namespace

ConvergenceTable merton_convergence_experiment(const MertonExperiment& preset,
                                               std::span<const double> tau_list,
                                               std::span<const std::uint64_t> seeds, Exec exec) {
    require(!tau_list.empty() && !seeds.empty(), ErrorKind::invalid_input,
            "tau_list and seeds must be nonempty");
    require(tau_list.front() > 0.0, ErrorKind::invalid_input, "tau values must be > 0");
    for (std::size_t i = 1; i < tau_list.size(); ++i) {
        require(tau_list[i] > tau_list[i - 1], ErrorKind::invalid_input,
                "tau_list must be increasing");
    }
    preset.theta0.validate();
    const OptionSpec opt{OptionKind::call, preset.strike, preset.maturity};
    opt.validate();
    const double ref =
        merton_mc_price(opt, preset.s0, preset.rho, preset.sigma, preset.theta0, preset.series_tol)
            .value;

    const std::size_t cols = tau_list.size();
    const std::size_t cells = seeds.size() * cols;
    std::vector<double> price(cells, kNaN);
    std::vector<double> err(cells, kNaN);
    for_each_index(cells, exec, [&](std::size_t k) {
        const std::size_t s = k / cols;
        const std::size_t c = k % cols;
        const auto record = simulate_jump_record(preset.theta0, tau_list.back(), seeds[s]);
        try {
            const auto window = record.restricted(tau_list[c]);
            const auto post = MertonPosterior::fit(window, preset.prior);
            const auto r = subjective_merton_price(opt, preset.s0, preset.rho, preset.sigma, post,
                                                   preset.n_samples, posterior_seed(seeds[s]),
                                                   preset.series_tol, Exec::serial);
            price[k] = r.value;
            err[k] = r.abs_error_estimate;
        } catch (const Error&) {
            // too few jumps or too many rejected draws: skipped
        }
    });

    ConvergenceTable table;
    for (std::size_t c = 0; c < cols; ++c) {
        std::vector<double> p, r, e;
        std::size_t skipped = 0;
        for (std::size_t s = 0; s < seeds.size(); ++s) {
            const std::size_t k = s * cols + c;
            if (std::isnan(price[k])) {
                ++skipped;
                continue;
            }
            p.push_back(price[k]);
            r.push_back(std::abs(price[k] - ref) / ref);
            e.push_back(err[k]);
        }
        ConvergenceRow row;
        row.index = tau_list[c];
        row.subjective = median_of(p);
        row.reference = ref;
        row.rel_diff = median_of(r);
        row.err = e.empty() ? kNaN : *std::max_element(e.begin(), e.end());
        row.skipped = skipped;
        table.rows.push_back(row);
    }
    return table;
}

PriceTrace merton_price_trace(const MertonExperiment& preset, std::span<const double> tau_grid,
                              std::uint64_t seed, Exec exec) {
    require(!tau_grid.empty() && tau_grid.front() > 0.0, ErrorKind::invalid_input,
            "tau grid must be nonempty and positive");
    for (std::size_t i = 1; i < tau_grid.size(); ++i) {
        require(tau_grid[i] > tau_grid[i - 1], ErrorKind::invalid_input,
                "tau grid must be increasing");
    }
    const OptionSpec opt{OptionKind::call, preset.strike, preset.maturity};
    opt.validate();
    PriceTrace trace;
    trace.jumps = simulate_jump_record(preset.theta0, tau_grid.back(), seed);
    trace.taus.assign(tau_grid.begin(), tau_grid.end());
    trace.prices.assign(tau_grid.size(), kNaN);
    trace.errors.assign(tau_grid.size(), kNaN);
    for_each_index(tau_grid.size(), exec, [&](std::size_t i) {
        const auto window = trace.jumps.restricted(tau_grid[i]);
        if (window.count() < MertonPosterior::kMinJumps) return;
        try {
            const auto post = MertonPosterior::fit(window, preset.prior);
            const auto r = subjective_merton_price(opt, preset.s0, preset.rho, preset.sigma, post,
                                                   preset.n_samples, posterior_seed(seed),
                                                   preset.series_tol, Exec::serial);
            trace.prices[i] = r.value;
            trace.errors[i] = r.abs_error_estimate;
        } catch (const Error&) {
        }
    });
    return trace;
}

std::vector<std::size_t> detect_discontinuities(const PriceTrace& trace, double factor) {
    require(factor > 0.0, ErrorKind::invalid_input, "factor must be > 0");
    std::vector<std::size_t> out;
    for (std::size_t i = 1; i < trace.prices.size(); ++i) {
        const double a = trace.prices[i - 1];
        const double b = trace.prices[i];
        if (std::isnan(a) || std::isnan(b)) continue;
        const double e = std::max(trace.errors[i - 1], trace.errors[i]);
        if (std::abs(b - a) > factor * e) out.push_back(i);
    }
    return out;
}

}  // namespace bq
