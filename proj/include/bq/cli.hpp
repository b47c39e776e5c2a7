#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bq/errors.hpp"
#include "bq/market_sim.hpp"

namespace bq::cli {

// Everything a command needs besides the output directory.  Serialized as a
// flat JSON object; unknown keys are rejected.
struct ExperimentConfig {
    std::string model = "bs";  // "bs" or "merton"
    double s0 = 100.0;
    double rho = 0.002;
    double sigma = 0.158;
    MertonTheta theta{4.0, 0.0025, 0.0};
    double maturity = 0.25;
    std::vector<double> strikes;
    double convergence_strike = 100.0;
    double dt = 1.0 / 252.0;      // observation spacing (years)
    std::size_t n_obs = 150;      // bs: increments in a simulated history
    double tau = 2.0;             // merton: observation window (years)
    std::vector<std::size_t> n_list;  // bs convergence
    std::vector<double> tau_list;     // merton convergence
    std::vector<double> surface_grid; // n (bs) or tau (merton) values of the price surface
    std::string prior = "noninformative";
    std::uint64_t seed = 1;
    std::vector<std::uint64_t> seeds;
    double quad_tol = 1e-8;
    double series_tol = 1e-10;
    std::size_t n_samples = 20000;

    bool is_bs() const noexcept { return model == "bs"; }
    // Throws invalid_input naming the offending field.
    void validate() const;
};

nlohmann::json to_json(const ExperimentConfig& cfg);
ExperimentConfig config_from_json(const nlohmann::json& j);

// "bs-example" or "merton-example"; throws invalid_input otherwise.
ExperimentConfig preset(const std::string& name);

// 0 success, 1 numerical or acceptance failure, 2 validation failure.
int exit_code_for(ErrorKind kind) noexcept;

int run(int argc, char** argv);

}  // namespace bq::cli
