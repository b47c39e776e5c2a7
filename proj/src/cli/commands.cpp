#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "bq/analytic_pricing.hpp"
#include "bq/bayes_engine.hpp"
#include "bq/cli.hpp"
#include "bq/consistency_lab.hpp"
#include "bq/io.hpp"
#include "bq/parallel.hpp"
#include "bq/rng.hpp"

namespace bq::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "0.1.0";

struct Context {
    ExperimentConfig cfg;
    fs::path out;
};

json provenance(const Context& ctx, const std::string& command, const json& input = nullptr) {
    json p;
    p["tool"] = "bq";
    p["version"] = kVersion;
    p["command"] = command;
    p["config"] = to_json(ctx.cfg);
    if (!input.is_null()) p["input"] = input;
    return p;
}

void write_file(const fs::path& path, const std::string& content) {
    io::write_text_file(path, content);
    std::cout << "wrote " << path.string() << '\n';
}

VariancePrior bs_prior(const ExperimentConfig& cfg) {
    if (cfg.prior == "variance_gamma") {
        return VariancePrior::custom(
            [](const double& v) { return v > 0.0 ? std::log(v) - v : -kInf; },
            "pi(v) = v exp(-v)");
    }
    return VariancePrior::noninformative();
}

BsParams bs_params(const ExperimentConfig& cfg) { return BsParams{cfg.s0, cfg.rho, cfg.sigma}; }

std::vector<double> bs_grid(const ExperimentConfig& cfg) {
    std::vector<double> grid(cfg.n_obs + 1);
    for (std::size_t j = 0; j <= cfg.n_obs; ++j) {
        grid[j] = -static_cast<double>(cfg.n_obs - j) * cfg.dt;
    }
    return grid;
}

std::uint64_t posterior_seed(const ExperimentConfig& cfg) { return rng::derive_seed(cfg.seed, 2); }

// ---------------------------------------------------------------------------

int cmd_simulate(const Context& ctx) {
    const auto& cfg = ctx.cfg;
    const json prov = provenance(ctx, "simulate");
    std::ostringstream series_csv;
    if (cfg.is_bs()) {
        const auto grid = bs_grid(cfg);
        const auto series = simulate_bs_path(bs_params(cfg), grid, cfg.seed);
        io::write_series_csv(series_csv, series, &prov);
        write_file(ctx.out / "series.csv", series_csv.str());
        return 0;
    }
    const auto path = simulate_merton_path(bs_params(cfg), cfg.theta, cfg.tau, cfg.dt, cfg.seed);
    io::write_series_csv(series_csv, path.series, &prov);
    write_file(ctx.out / "series.csv", series_csv.str());
    std::ostringstream jumps_csv;
    io::write_jumps_csv(jumps_csv, path.jumps, &prov);
    write_file(ctx.out / "jumps.csv", jumps_csv.str());
    std::cout << "jumps: " << path.jumps.count() << " on [-" << cfg.tau << ", 0]\n";
    return 0;
}

struct PriceRow {
    double strike = 0.0;
    PriceResult call;
    PriceResult put;
    double parity_defect = 0.0;
    double reference_call = 0.0;
};

void emit_prices(const Context& ctx, const std::vector<PriceRow>& rows, const json& prov,
                 const json& posterior) {
    std::ostringstream csv;
    csv << io::kProvenancePrefix << prov.dump() << '\n';
    csv << "strike,call,call_err,put,put_err,parity_defect,reference_call\n";
    json j;
    j["provenance"] = prov;
    j["posterior"] = posterior;
    j["rows"] = json::array();
    for (const auto& r : rows) {
        csv << io::format_double(r.strike) << ',' << io::format_double(r.call.value) << ','
            << io::format_double(r.call.abs_error_estimate) << ','
            << io::format_double(r.put.value) << ','
            << io::format_double(r.put.abs_error_estimate) << ','
            << io::format_double(r.parity_defect) << ',' << io::format_double(r.reference_call)
            << '\n';
        j["rows"].push_back({{"strike", r.strike},
                             {"call", io::to_json(r.call)},
                             {"put", io::to_json(r.put)},
                             {"parity_defect", r.parity_defect},
                             {"reference_call", r.reference_call}});
    }
    write_file(ctx.out / "prices.csv", csv.str());
    write_file(ctx.out / "prices.json", j.dump(2) + "\n");
}

int cmd_price(const Context& ctx, const std::string& input) {
    const auto& cfg = ctx.cfg;
    json input_prov;
    std::vector<PriceRow> rows;
    const double disc = std::exp(-cfg.rho * cfg.maturity);
    if (cfg.is_bs()) {
        ObservationSeries series;
        if (!input.empty()) {
            std::istringstream in(io::read_text_file(input));
            input_prov = io::read_provenance(in);
            in.clear();
            in.seekg(0);
            series = io::read_series_csv(in);
        } else {
            series = simulate_bs_path(bs_params(cfg), bs_grid(cfg), cfg.seed);
        }
        const auto post = fit_bs_posterior(series, cfg.rho, bs_prior(cfg));
        std::cout << "posterior: n = " << post.n() << ", sigma_hat^2 = " << post.sigma_hat_sq()
                  << '\n';
        for (double k : cfg.strikes) {
            PriceRow r;
            r.strike = k;
            r.call = subjective_bs_price({OptionKind::call, k, cfg.maturity}, cfg.s0, cfg.rho, post,
                                         cfg.quad_tol);
            r.put = subjective_bs_price({OptionKind::put, k, cfg.maturity}, cfg.s0, cfg.rho, post,
                                        cfg.quad_tol);
            r.parity_defect = r.call.value - r.put.value - (cfg.s0 - k * disc);
            r.reference_call =
                bs_price({OptionKind::call, k, cfg.maturity}, cfg.s0, cfg.rho, cfg.sigma).value;
            rows.push_back(r);
        }
        emit_prices(ctx, rows, provenance(ctx, "price", input_prov), io::posterior_summary(post));
        return 0;
    }

    JumpRecord record;
    if (!input.empty()) {
        std::istringstream in(io::read_text_file(input));
        input_prov = io::read_provenance(in);
        double tau = cfg.tau;
        if (input_prov.contains("config") && input_prov["config"].contains("tau")) {
            tau = input_prov["config"]["tau"].get<double>();
        }
        in.clear();
        in.seekg(0);
        record = io::read_jumps_csv(in, tau);
    } else {
        record = simulate_jump_record(cfg.theta, cfg.tau, cfg.seed);
    }
    const auto post = MertonPosterior::fit(record, ThetaPrior::noninformative());
    std::cout << "posterior: N = " << post.n_jumps() << ", tau = " << post.tau()
              << ", lambda_hat = " << post.lambda_hat() << '\n';
    for (double k : cfg.strikes) {
        PriceRow r;
        r.strike = k;
        r.call = subjective_merton_price({OptionKind::call, k, cfg.maturity}, cfg.s0, cfg.rho,
                                         cfg.sigma, post, cfg.n_samples, posterior_seed(cfg),
                                         cfg.series_tol);
        r.put = subjective_merton_price({OptionKind::put, k, cfg.maturity}, cfg.s0, cfg.rho,
                                        cfg.sigma, post, cfg.n_samples, posterior_seed(cfg),
                                        cfg.series_tol);
        r.parity_defect = r.call.value - r.put.value - (cfg.s0 - k * disc);
        r.reference_call = merton_mc_price({OptionKind::call, k, cfg.maturity}, cfg.s0, cfg.rho,
                                           cfg.sigma, cfg.theta, cfg.series_tol)
                               .value;
        rows.push_back(r);
    }
    emit_prices(ctx, rows, provenance(ctx, "price", input_prov), io::posterior_summary(post));
    return 0;
}

void print_table(const ConvergenceTable& t) {
    std::printf("%12s %14s %14s %10s %10s %8s\n", "index", "subjective", "reference", "rel_diff",
                "err", "skipped");
    for (const auto& r : t.rows) {
        std::printf("%12g %14.8f %14.8f %10.5f %10.3g %8zu\n", r.index, r.subjective, r.reference,
                    r.rel_diff, r.err, r.skipped);
    }
}

int cmd_convergence(const Context& ctx) {
    const auto& cfg = ctx.cfg;
    ConvergenceTable table;
    if (cfg.is_bs()) {
        BsExperiment e;
        e.s0 = cfg.s0;
        e.rho = cfg.rho;
        e.sigma0 = cfg.sigma;
        e.maturity = cfg.maturity;
        e.strike = cfg.convergence_strike;
        e.dt = cfg.dt;
        e.prior = bs_prior(cfg);
        e.quad_tol = cfg.quad_tol;
        table = bs_convergence_experiment(e, cfg.n_list, cfg.seeds);
    } else {
        MertonExperiment e;
        e.s0 = cfg.s0;
        e.rho = cfg.rho;
        e.sigma = cfg.sigma;
        e.theta0 = cfg.theta;
        e.maturity = cfg.maturity;
        e.strike = cfg.convergence_strike;
        e.n_samples = cfg.n_samples;
        e.series_tol = cfg.series_tol;
        table = merton_convergence_experiment(e, cfg.tau_list, cfg.seeds);
    }
    print_table(table);
    const json prov = provenance(ctx, "convergence");
    std::ostringstream csv;
    io::write_convergence_csv(csv, table, &prov);
    write_file(ctx.out / "convergence.csv", csv.str());
    return 0;
}

int cmd_surface(const Context& ctx) {
    const auto& cfg = ctx.cfg;
    require(!cfg.surface_grid.empty(), ErrorKind::invalid_input,
            "config field 'surface_grid' must not be empty for the surface command");
    const json prov = provenance(ctx, "surface");
    std::ostringstream csv;
    csv << io::kProvenancePrefix << prov.dump() << '\n';
    csv << "index,strike,subjective,reference,err\n";
    auto row = [&](double index, double k, double subj, double ref, double err) {
        csv << io::format_double(index) << ',' << io::format_double(k) << ','
            << io::format_double(subj) << ',' << io::format_double(ref) << ','
            << io::format_double(err) << '\n';
    };
    if (cfg.is_bs()) {
        const auto full = simulate_bs_path(bs_params(cfg), bs_grid(cfg), cfg.seed);
        for (double nd : cfg.surface_grid) {
            const auto n = static_cast<std::size_t>(nd);
            const std::size_t first = cfg.n_obs - n;
            ObservationSeries win;
            win.times.assign(full.times.begin() + static_cast<std::ptrdiff_t>(first), full.times.end());
            win.quotes.assign(full.quotes.begin() + static_cast<std::ptrdiff_t>(first),
                              full.quotes.end());
            const auto post = fit_bs_posterior(win, cfg.rho, bs_prior(cfg));
            for (double k : cfg.strikes) {
                const OptionSpec opt{OptionKind::call, k, cfg.maturity};
                const auto r = subjective_bs_price(opt, cfg.s0, cfg.rho, post, cfg.quad_tol);
                row(nd, k, r.value, bs_price(opt, cfg.s0, cfg.rho, cfg.sigma).value,
                    r.abs_error_estimate);
            }
        }
        write_file(ctx.out / "surface.csv", csv.str());
        return 0;
    }
    MertonExperiment e;
    e.s0 = cfg.s0;
    e.rho = cfg.rho;
    e.sigma = cfg.sigma;
    e.theta0 = cfg.theta;
    e.maturity = cfg.maturity;
    e.n_samples = cfg.n_samples;
    e.series_tol = cfg.series_tol;
    PriceTrace last;
    std::vector<PriceTrace> traces;
    for (double k : cfg.strikes) {
        e.strike = k;
        traces.push_back(merton_price_trace(e, cfg.surface_grid, cfg.seed));
    }
    for (std::size_t i = 0; i < cfg.surface_grid.size(); ++i) {
        for (std::size_t s = 0; s < cfg.strikes.size(); ++s) {
            const OptionSpec opt{OptionKind::call, cfg.strikes[s], cfg.maturity};
            const double ref =
                merton_mc_price(opt, cfg.s0, cfg.rho, cfg.sigma, cfg.theta, cfg.series_tol).value;
            row(cfg.surface_grid[i], cfg.strikes[s], traces[s].prices[i], ref, traces[s].errors[i]);
        }
    }
    write_file(ctx.out / "surface.csv", csv.str());
    // The record is restricted to the surface's largest window.
    std::ostringstream jumps_csv;
    io::write_jumps_csv(jumps_csv, traces.front().jumps, &prov);
    write_file(ctx.out / "surface_jumps.csv", jumps_csv.str());
    return 0;
}

// ---------------------------------------------------------------------------
// Self-test: fast invariant battery with a deterministic report.

struct Battery {
    std::vector<std::string> lines;
    bool ok = true;

    void check(const std::string& name, bool pass, const std::string& detail) {
        lines.push_back(std::string(pass ? "PASS " : "FAIL ") + name + ": " + detail);
        ok = ok && pass;
    }
};

std::string fmt(const char* f, double a, double b = 0.0) {
    char buf[160];
    std::snprintf(buf, sizeof buf, f, a, b);
    return buf;
}

int cmd_selftest(const std::string& fault) {
    if (fault == "norm_cdf") {
        detail::set_norm_cdf_fault(1e-3);
    } else {
        require(fault.empty(), ErrorKind::invalid_input,
                "unknown fault '" + fault + "' (supported: norm_cdf)");
    }
    Battery b;
    try {
        const double phi0 = norm_cdf(0.0);
        const double sym = norm_cdf(1.3) + norm_cdf(-1.3) - 1.0;
        b.check("norm_cdf_symmetry", std::abs(phi0 - 0.5) <= 1e-15 && std::abs(sym) <= 1e-15,
                fmt("Phi(0) - 1/2 = %.3g, Phi(x) + Phi(-x) - 1 = %.3g", phi0 - 0.5, sym));

        double worst = 0.0;
        for (double k : {60.0, 90.0, 100.0, 110.0, 150.0}) {
            for (double sigma : {0.05, 0.158, 0.6}) {
                const OptionSpec c{OptionKind::call, k, 0.25};
                const OptionSpec p{OptionKind::put, k, 0.25};
                const double d = bs_price(c, 100.0, 0.002, sigma).value -
                                 bs_price(p, 100.0, 0.002, sigma).value -
                                 (100.0 - k * std::exp(-0.002 * 0.25));
                worst = std::max(worst, std::abs(d));
            }
        }
        b.check("bs_put_call_parity", worst <= 1e-10, fmt("max |C - P - (S0 - K e^{-rho T})| = %.3g", worst));

        const auto post = BsPosterior::from_statistics(20, 0.158 * 0.158, VariancePrior::noninformative());
        const double a = 9.0;
        const double scale = 10.0 * 0.158 * 0.158;
        double rel = 0.0;
        for (int i = 1; i < 200; ++i) {
            const double v = 0.158 * 0.158 * std::exp(-2.0 + 4.0 * i / 200.0);
            const double ref = a * std::log(scale) - std::lgamma(a) - (a + 1.0) * std::log(v) - scale / v;
            rel = std::max(rel, std::abs(std::expm1(post.log_density(v) - ref)));
        }
        b.check("bs_posterior_normalization", rel <= 1e-8,
                fmt("max rel. deviation from inverse gamma = %.3g", rel));

        const OptionSpec atm_c{OptionKind::call, 100.0, 0.25};
        const OptionSpec atm_p{OptionKind::put, 100.0, 0.25};
        const double sc = subjective_bs_price(atm_c, 100.0, 0.002, post, 1e-8).value;
        const double sp = subjective_bs_price(atm_p, 100.0, 0.002, post, 1e-8).value;
        const double sdef = sc - sp - (100.0 - 100.0 * std::exp(-0.0005));
        b.check("subjective_bs_parity", std::abs(sdef) <= 2e-8, fmt("defect = %.3g", sdef));

        const auto mpost =
            MertonPosterior::from_statistics(8, 2.0, 0.0, 0.0025, ThetaPrior::noninformative());
        double lrel = 0.0;
        for (int i = 1; i < 200; ++i) {
            const double lam = 0.05 * i;
            const double ref = std::exp(9.0 * std::log(2.0) + 8.0 * std::log(lam) - 2.0 * lam -
                                        std::lgamma(9.0));
            lrel = std::max(lrel, std::abs(mpost.lambda_marginal_density(lam) / ref - 1.0));
        }
        b.check("merton_lambda_marginal", lrel <= 1e-6, fmt("max rel. deviation from Gamma = %.3g", lrel));

        const MertonTheta theta0{4.0, 0.0025, 0.0};
        const double mc = merton_mc_price(atm_c, 100.0, 0.002, 0.158, theta0, 1e-10).value;
        const double mp = merton_mc_price(atm_p, 100.0, 0.002, 0.158, theta0, 1e-10).value;
        const double mdef = mc - mp - (100.0 - 100.0 * std::exp(-0.0005));
        b.check("merton_series_parity_m0", std::abs(mdef) <= 1e-9, fmt("defect = %.3g", mdef));

        const double lam0 = merton_mc_price(atm_c, 100.0, 0.002, 0.158, {0.0, 0.0025, 0.0}, 1e-10).value;
        const double bs0 = bs_price(atm_c, 100.0, 0.002, 0.158).value;
        b.check("merton_series_lambda0", std::abs(lam0 - bs0) <= 1e-12,
                fmt("|series - bs| = %.3g", std::abs(lam0 - bs0)));

        const auto mb = martingale_check_bs(post, 100.0, 0.002, 0.25, 100000, 11);
        b.check("martingale_bs", mb.pass, fmt("mean = %.6f, 3 stderr = %.6f", mb.estimate, 3.0 * mb.std_error));
        const auto mm = martingale_check_merton(mpost, 100.0, 0.002, 0.158, 0.25, 100000, 11);
        b.check("martingale_merton", mm.pass,
                fmt("mean = %.6f, 3 stderr = %.6f", mm.estimate, 3.0 * mm.std_error));

        const auto quad = quadratic_saddle_problem([](double) { return 2.5; });
        const double cr = saddle_ratio(quad, 1000, 1e-12);
        b.check("saddle_constant_ratio", std::abs(cr - 2.5) <= 1e-12, fmt("ratio - 2.5 = %.3g", cr - 2.5));
    } catch (const Error& e) {
        b.check("exception", false, e.what());
    }
    detail::set_norm_cdf_fault(0.0);
    for (const auto& l : b.lines) std::cout << l << '\n';
    std::cout << (b.ok ? "selftest: all invariants hold\n" : "selftest: FAILED\n");
    return b.ok ? 0 : 1;
}

}  // namespace

int run(int argc, char** argv) {
    CLI::App app{"bq: Bayesian option pricing experiments"};
    app.fallthrough();
    app.require_subcommand(1);

    std::string config_path;
    std::string preset_name;
    std::optional<std::uint64_t> seed;
    std::string out = "out";
    int threads = 0;
    app.add_option("--config", config_path, "JSON experiment config");
    app.add_option("--preset", preset_name, "bs-example or merton-example (default bs-example)");
    app.add_option("--seed", seed, "overrides seed; seeds becomes seed, seed+1, ...");
    app.add_option("--out", out, "output directory")->capture_default_str();
    app.add_option("--threads", threads, "worker threads (default: BQ_THREADS, then OpenMP)");

    auto* sim = app.add_subcommand("simulate", "simulate a path (and jump record)");
    auto* price = app.add_subcommand("price", "subjective prices over the strike grid");
    std::string input;
    price->add_option("--input", input, "series.csv (bs) or jumps.csv (merton); default: simulate");
    auto* conv = app.add_subcommand("convergence", "median relative deviation table");
    auto* surf = app.add_subcommand("surface", "single-history price surface");
    auto* self = app.add_subcommand("selftest", "fast invariant battery");
    std::string fault;
    self->add_option("--inject-fault", fault, "test hook: norm_cdf");
    auto* show = app.add_subcommand("config", "print the resolved config as JSON");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        configure_threads(threads);
        if (self->parsed()) return cmd_selftest(fault);

        require(config_path.empty() || preset_name.empty(), ErrorKind::invalid_input,
                "--config and --preset are mutually exclusive");
        Context ctx;
        if (!config_path.empty()) {
            json j;
            try {
                j = json::parse(io::read_text_file(config_path));
            } catch (const json::exception& e) {
                fail(ErrorKind::invalid_input, std::string("config is not valid JSON: ") + e.what());
            }
            ctx.cfg = config_from_json(j);
        } else {
            ctx.cfg = preset(preset_name.empty() ? "bs-example" : preset_name);
        }
        if (seed) {
            ctx.cfg.seed = *seed;
            for (std::size_t i = 0; i < ctx.cfg.seeds.size(); ++i) ctx.cfg.seeds[i] = *seed + i;
        }
        ctx.cfg.validate();
        ctx.out = out;

        if (show->parsed()) {
            std::cout << to_json(ctx.cfg).dump(2) << '\n';
            return 0;
        }
        if (sim->parsed()) return cmd_simulate(ctx);
        if (price->parsed()) return cmd_price(ctx, input);
        if (conv->parsed()) return cmd_convergence(ctx);
        if (surf->parsed()) return cmd_surface(ctx);
    } catch (const Error& e) {
        std::cerr << "bq: " << e.what() << '\n';
        return exit_code_for(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "bq: " << e.what() << '\n';
        return 1;
    }
    return 2;
}

}  // namespace bq::cli
