#include <cmath>
#include <set>
#include <string>

#include "bq/cli.hpp"

namespace bq::cli {

using nlohmann::json;

namespace {

void check(bool ok, const std::string& field, const std::string& what) {
    require(ok, ErrorKind::invalid_input, "config field '" + field + "' " + what);
}

template <class T>
T get_field(const json& j, const char* key) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        fail(ErrorKind::invalid_input, std::string("config field '") + key + "' has the wrong type");
    }
}

}  // namespace

void ExperimentConfig::validate() const {
    check(model == "bs" || model == "merton", "model", "must be \"bs\" or \"merton\"");
    check(std::isfinite(s0) && s0 > 0.0, "s0", "must be > 0");
    check(std::isfinite(rho), "rho", "must be finite");
    check(std::isfinite(sigma) && sigma > 0.0, "sigma", "must be > 0");
    check(std::isfinite(maturity) && maturity > 0.0, "maturity", "must be > 0");
    check(!strikes.empty(), "strikes", "must not be empty");
    for (double k : strikes) check(std::isfinite(k) && k > 0.0, "strikes", "entries must be > 0");
    check(std::isfinite(convergence_strike) && convergence_strike > 0.0, "convergence_strike",
          "must be > 0");
    check(std::isfinite(dt) && dt > 0.0, "dt", "must be > 0");
    check(quad_tol > 0.0, "quad_tol", "must be > 0");
    check(series_tol > 0.0, "series_tol", "must be > 0");
    check(n_samples >= 1000, "n_samples", "must be >= 1000");
    check(!seeds.empty(), "seeds", "must not be empty");
    if (model == "bs") {
        check(prior == "noninformative" || prior == "variance_gamma", "prior",
              "must be \"noninformative\" or \"variance_gamma\" for the bs model");
        check(n_obs >= 3, "n_obs", "must be >= 3");
        check(!n_list.empty(), "n_list", "must not be empty");
        for (std::size_t i = 0; i < n_list.size(); ++i) {
            check(n_list[i] >= 3, "n_list", "entries must be >= 3");
            check(i == 0 || n_list[i] > n_list[i - 1], "n_list", "must be strictly increasing");
        }
        for (std::size_t i = 0; i < surface_grid.size(); ++i) {
            const double v = surface_grid[i];
            check(v >= 3.0 && v == std::floor(v) && v <= static_cast<double>(n_obs), "surface_grid",
                  "entries must be integers in [3, n_obs]");
            check(i == 0 || v > surface_grid[i - 1], "surface_grid", "must be strictly increasing");
        }
    } else {
        check(prior == "noninformative", "prior", "must be \"noninformative\" for the merton model");
        check(std::isfinite(theta.lambda) && theta.lambda > 0.0, "theta.lambda", "must be > 0");
        check(std::isfinite(theta.delta_sq) && theta.delta_sq > 0.0, "theta.delta_sq",
              "must be > 0");
        check(std::isfinite(theta.m), "theta.m", "must be finite");
        check(std::isfinite(tau) && tau > 0.0, "tau", "must be > 0");
        check(!tau_list.empty(), "tau_list", "must not be empty");
        for (std::size_t i = 0; i < tau_list.size(); ++i) {
            check(tau_list[i] > 0.0, "tau_list", "entries must be > 0");
            check(i == 0 || tau_list[i] > tau_list[i - 1], "tau_list", "must be strictly increasing");
        }
        for (std::size_t i = 0; i < surface_grid.size(); ++i) {
            check(surface_grid[i] > 0.0 && surface_grid[i] <= tau, "surface_grid",
                  "entries must lie in (0, tau]");
            check(i == 0 || surface_grid[i] > surface_grid[i - 1], "surface_grid",
                  "must be strictly increasing");
        }
    }
}

json to_json(const ExperimentConfig& c) {
    json j;
    j["model"] = c.model;
    j["s0"] = c.s0;
    j["rho"] = c.rho;
    j["sigma"] = c.sigma;
    j["theta"] = {{"lambda", c.theta.lambda}, {"delta_sq", c.theta.delta_sq}, {"m", c.theta.m}};
    j["maturity"] = c.maturity;
    j["strikes"] = c.strikes;
    j["convergence_strike"] = c.convergence_strike;
    j["dt"] = c.dt;
    j["n_obs"] = c.n_obs;
    j["tau"] = c.tau;
    j["n_list"] = c.n_list;
    j["tau_list"] = c.tau_list;
    j["surface_grid"] = c.surface_grid;
    j["prior"] = c.prior;
    j["seed"] = c.seed;
    j["seeds"] = c.seeds;
    j["quad_tol"] = c.quad_tol;
    j["series_tol"] = c.series_tol;
    j["n_samples"] = c.n_samples;
    return j;
}

ExperimentConfig config_from_json(const json& j) {
    require(j.is_object(), ErrorKind::invalid_input, "config must be a JSON object");
    static const std::set<std::string> known{
        "model",  "s0",       "rho",          "sigma",    "theta",    "maturity",
        "strikes", "convergence_strike", "dt", "n_obs",   "tau",      "n_list",
        "tau_list", "surface_grid", "prior",  "seed",     "seeds",    "quad_tol",
        "series_tol", "n_samples"};
    for (const auto& [key, value] : j.items()) {
        require(known.count(key) == 1, ErrorKind::invalid_input, "config: unknown key '" + key + "'");
    }
    ExperimentConfig c;
    if (j.contains("model")) c.model = get_field<std::string>(j, "model");
    c = j.contains("model") && c.model == "merton" ? preset("merton-example") : preset("bs-example");
    if (j.contains("s0")) c.s0 = get_field<double>(j, "s0");
    if (j.contains("rho")) c.rho = get_field<double>(j, "rho");
    if (j.contains("sigma")) c.sigma = get_field<double>(j, "sigma");
    if (j.contains("theta")) {
        const auto& t = j.at("theta");
        require(t.is_object(), ErrorKind::invalid_input, "config field 'theta' must be an object");
        for (const auto& [key, value] : t.items()) {
            require(key == "lambda" || key == "delta_sq" || key == "m", ErrorKind::invalid_input,
                    "config: unknown key 'theta." + key + "'");
        }
        if (t.contains("lambda")) c.theta.lambda = get_field<double>(t, "lambda");
        if (t.contains("delta_sq")) c.theta.delta_sq = get_field<double>(t, "delta_sq");
        if (t.contains("m")) c.theta.m = get_field<double>(t, "m");
    }
    if (j.contains("maturity")) c.maturity = get_field<double>(j, "maturity");
    if (j.contains("strikes")) c.strikes = get_field<std::vector<double>>(j, "strikes");
    if (j.contains("convergence_strike")) c.convergence_strike = get_field<double>(j, "convergence_strike");
    if (j.contains("dt")) c.dt = get_field<double>(j, "dt");
    if (j.contains("n_obs")) c.n_obs = get_field<std::size_t>(j, "n_obs");
    if (j.contains("tau")) c.tau = get_field<double>(j, "tau");
    if (j.contains("n_list")) c.n_list = get_field<std::vector<std::size_t>>(j, "n_list");
    if (j.contains("tau_list")) c.tau_list = get_field<std::vector<double>>(j, "tau_list");
    if (j.contains("surface_grid")) c.surface_grid = get_field<std::vector<double>>(j, "surface_grid");
    if (j.contains("prior")) c.prior = get_field<std::string>(j, "prior");
    if (j.contains("seed")) c.seed = get_field<std::uint64_t>(j, "seed");
    if (j.contains("seeds")) c.seeds = get_field<std::vector<std::uint64_t>>(j, "seeds");
    if (j.contains("quad_tol")) c.quad_tol = get_field<double>(j, "quad_tol");
    if (j.contains("series_tol")) c.series_tol = get_field<double>(j, "series_tol");
    if (j.contains("n_samples")) c.n_samples = get_field<std::size_t>(j, "n_samples");
    c.validate();
    return c;
}

ExperimentConfig preset(const std::string& name) {
    ExperimentConfig c;
    if (name == "bs-example") {
        c.model = "bs";
        for (int k = 80; k <= 134; ++k) c.strikes.push_back(k);
        c.n_obs = 150;
        c.n_list = {5, 10, 20, 50, 150, 1000};
        for (int n = 3; n <= 150; ++n) c.surface_grid.push_back(n);
        for (std::uint64_t s = 1; s <= 200; ++s) c.seeds.push_back(s);
        return c;
    }
    if (name == "merton-example") {
        c.model = "merton";
        for (int k = 60; k <= 140; k += 10) c.strikes.push_back(k);
        c.tau = 2.0;
        c.tau_list = {0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0};
        for (int i = 1; i <= 100; ++i) c.surface_grid.push_back(0.02 * i);
        for (std::uint64_t s = 1; s <= 100; ++s) c.seeds.push_back(s);
        return c;
    }
    fail(ErrorKind::invalid_input, "unknown preset '" + name + "' (bs-example, merton-example)");
}

int exit_code_for(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::invalid_input:
        case ErrorKind::degenerate_data:
        case ErrorKind::insufficient_jumps:
        case ErrorKind::degenerate_prior:
        case ErrorKind::io:
            return 2;
        case ErrorKind::domain:
        case ErrorKind::degenerate_density:
        case ErrorKind::numerical:
        case ErrorKind::reliability:
            return 1;
    }
    return 1;
}

}  // namespace bq::cli
