#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "bq/analytic_pricing.hpp"
#include "bq/market_sim.hpp"
#include "bq/parallel.hpp"
#include "bq/quadrature.hpp"
#include "bq/rng.hpp"

namespace bq {

enum class PriorKind { noninformative_unit, custom };

// Prior as a log-density (up to a constant).  Custom priors must be
// continuous and bounded above on their support; -inf marks zero mass.
template <class Arg>
struct Prior {
    PriorKind kind = PriorKind::noninformative_unit;
    std::function<double(const Arg&)> log_density;
    std::string support_note;

    static Prior noninformative() {
        return Prior{PriorKind::noninformative_unit, [](const Arg&) { return 0.0; },
                     "pi = 1 (improper)"};
    }
    static Prior custom(std::function<double(const Arg&)> log_density, std::string note) {
        return Prior{PriorKind::custom, std::move(log_density), std::move(note)};
    }

    double operator()(const Arg& x) const { return log_density(x); }
};

using VariancePrior = Prior<double>;     // over sigma^2
using ThetaPrior = Prior<MertonTheta>;   // over (lambda, delta^2, m)

const char* to_string(PriorKind kind) noexcept;

// X_j = (log(S_{j+1}/S_j) - rho*dt_j) / sqrt(dt_j).  Needs >= 3 quotes.
std::vector<double> log_returns(const ObservationSeries& series, double rho);

// Posterior of sigma^2:  f_n(v) ∝ v^(-n/2) exp(-n*sigma_hat^2 / (2v)) pi(v).
//
// The normalizer is always computed by adaptive quadrature over (0, inf) with
// the scouting range [s/c, s*c] (s = sigma_hat^2), c doubled until the density
// at both ends is below 1e-12 of the mode.  Under the unit prior this is an
// inverse gamma with shape n/2 - 1, so n >= 3 is required there.
class BsPosterior {
public:
    static BsPosterior from_statistics(std::size_t n, double sigma_hat_sq, VariancePrior prior);

    std::size_t n() const noexcept { return n_; }
    double sigma_hat_sq() const noexcept { return sigma_hat_sq_; }
    const VariancePrior& prior() const noexcept { return prior_; }
    double log_norm() const noexcept { return log_norm_; }
    double norm_rel_error() const noexcept { return norm_rel_error_; }
    Bracket scout_bracket() const noexcept { return scout_; }

    double log_density(double variance) const;
    double density(double variance) const;

    // Unnormalized log-density (without -log_norm), shifted so the likelihood
    // part peaks at 0.
    double log_kernel(double variance) const;

    // One posterior draw of sigma^2.  Exact inverse-gamma for the unit prior,
    // otherwise inverse-CDF on the tabulated grid (see sampling_grid_size).
    double draw(rng::Xoshiro256& gen) const;
    std::vector<double> sample(std::size_t count, std::uint64_t seed) const;

    // Cells of the log-spaced inverse-CDF table used for custom priors.
    static constexpr std::size_t sampling_grid_size = 16384;

    // E[g(sigma^2)] under the posterior, ratio tolerance `tol`.
    LogDensityIntegral expectation(const RealFn& g, double tol) const;

private:
    BsPosterior() = default;
    void build_sampling_table();

    std::size_t n_ = 0;
    double sigma_hat_sq_ = 0.0;
    VariancePrior prior_;
    double log_norm_ = 0.0;
    double norm_rel_error_ = 0.0;
    Bracket scout_{};
    // custom priors only: log-variance knots and cumulative mass
    std::shared_ptr<const std::vector<double>> table_x_;
    std::shared_ptr<const std::vector<double>> table_cdf_;
};

BsPosterior fit_bs_posterior(const ObservationSeries& series, double rho, VariancePrior prior);

PriceResult subjective_bs_price(const OptionSpec& opt, double s0, double rho,
                                const BsPosterior& post, double tol);

// Posterior of theta = (lambda, delta^2, m) from a jump record:
//   f ∝ exp(-tau*lambda) lambda^N  delta^-N exp(-(N/2)(dhat^2/delta^2 + ((mhat-m)/delta)^2)) pi
// Under the unit prior it factorizes into
//   lambda ~ Gamma(N+1, rate tau),
//   delta^2 ~ InvGamma((N-3)/2, N*dhat^2/2),
//   m | delta^2 ~ Normal(mhat, delta^2/N),
// which is proper only for N >= 4.  Custom priors are handled on a grid of
// kThetaGrid^3 cells in the quantile coordinates of that conjugate posterior:
// cell weights are pi(theta(cell centre)), sampling picks a cell by inverse CDF
// and jitters uniformly inside it.
class MertonPosterior {
public:
    static constexpr std::size_t kThetaGrid = 40;
    static constexpr std::size_t kMinJumps = 4;

    static MertonPosterior fit(const JumpRecord& record, ThetaPrior prior);
    static MertonPosterior from_statistics(std::size_t n_jumps, double tau, double m_hat,
                                           double delta_hat_sq, ThetaPrior prior);

    std::size_t n_jumps() const noexcept { return n_jumps_; }
    double tau() const noexcept { return tau_; }
    double lambda_hat() const noexcept { return static_cast<double>(n_jumps_) / tau_; }
    double m_hat() const noexcept { return m_hat_; }
    double delta_hat_sq() const noexcept { return delta_hat_sq_; }
    const ThetaPrior& prior() const noexcept { return prior_; }
    double log_norm() const noexcept { return log_norm_; }

    double log_kernel(const MertonTheta& theta) const;
    double log_density(const MertonTheta& theta) const;

    // lambda-marginal for the unit prior: the (delta^2, m) factor is integrated
    // numerically once at fit time.  Throws invalid_input for custom priors.
    double lambda_marginal_density(double lambda) const;

    MertonTheta draw(rng::Xoshiro256& gen) const;
    // Sample i uses stream derive_seed(seed, i).
    std::vector<MertonTheta> sample(std::size_t count, std::uint64_t seed) const;

private:
    MertonPosterior() = default;
    MertonTheta from_quantiles(double u_lambda, double u_delta, double u_m) const;
    void build_custom_grid();

    std::size_t n_jumps_ = 0;
    double tau_ = 0.0;
    double m_hat_ = 0.0;
    double delta_hat_sq_ = 0.0;
    ThetaPrior prior_;
    double log_norm_ = 0.0;
    double log_jump_factor_ = 0.0;  // log of the numerically integrated (delta^2, m) factor
    std::shared_ptr<const std::vector<double>> cell_cdf_;
};

MertonPosterior fit_merton_posterior(const JumpRecord& record, ThetaPrior prior);

std::vector<MertonTheta> sample_merton_posterior(const MertonPosterior& post, std::size_t count,
                                                 std::uint64_t seed);

// Per-sample series values of a posterior mixture.  Rejected samples (a
// retained term with K - n*m <= 0) are NaN.
struct MixtureValues {
    std::vector<double> values;
    std::size_t rejected = 0;
};

MixtureValues evaluate_merton_mixture(std::span<const MertonTheta> thetas, const OptionSpec& opt,
                                      double s0, double rho, double sigma, double series_tol,
                                      Exec exec = Exec::parallel);

// Mean over n_samples posterior draws of merton_mc_price; error estimate is
// 3 * stderr + series_tol.  More than 1% rejected samples -> ReliabilityError.
PriceResult subjective_merton_price(const OptionSpec& opt, double s0, double rho, double sigma,
                                    const MertonPosterior& post, std::size_t n_samples,
                                    std::uint64_t seed, double series_tol,
                                    Exec exec = Exec::parallel);

}  // namespace bq
