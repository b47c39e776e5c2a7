#include <doctest.h>

#include <boost/math/special_functions/erf.hpp>

#include <cmath>
#include <numbers>
#include <set>

#include "bq/consistency_lab.hpp"
#include "bq/errors.hpp"
#include "bq/market_sim.hpp"
#include "bq/rng.hpp"

using namespace bq;

namespace {

// E[theta^2] for theta - 1 ~ N(0, 1/n) truncated to (-1, 1).
double truncated_second_moment(double n) {
    const double a = std::sqrt(n);
    const double phi = std::exp(-0.5 * a * a) / std::sqrt(2.0 * std::numbers::pi);
    const double mass = boost::math::erf(a / std::numbers::sqrt2);
    return 1.0 + (1.0 / n) * (1.0 - 2.0 * a * phi / mass);
}

double bs_call_of_variance(double v) {
    return bs_value(OptionKind::call, 100.0, 100.0, 0.25, 0.002, std::sqrt(v));
}

}  // namespace

TEST_CASE("constant g returns the constant for every n") {
    const auto quad = quadratic_saddle_problem([](double) { return -1.75; });
    const auto bs = bs_saddle_problem(0.025, [](double) { return 0.027; }, [](double) { return 4.5; });
    for (std::size_t n : {1u, 7u, 100u, 10000u, 1000000u}) {
        CHECK(std::abs(saddle_ratio(quad, n, 1e-12) + 1.75) <= 1e-12);
        if (n >= 5) CHECK(std::abs(saddle_ratio(bs, n, 1e-12) - 4.5) <= 1e-12 * 4.5);
    }
    const std::size_t ns[] = {10, 100, 1000};
    const auto table = saddle_convergence_check(quad, ns, 1e-12);
    for (const auto& r : table.rows) CHECK(r.rel_diff <= 1e-12);
}

TEST_CASE("quadratic instance matches the truncated Gaussian closed form") {
    const auto lin = quadratic_saddle_problem([](double t) { return t; });
    CHECK(std::abs(saddle_ratio(lin, 10000, 1e-12) - 1.0) < 0.02);
    const auto sq = quadratic_saddle_problem([](double t) { return t * t; });
    for (std::size_t n : {1u, 3u, 10u, 100u, 10000u}) {
        CAPTURE(n);
        CHECK(std::abs(saddle_ratio(sq, n, 1e-13) - truncated_second_moment(double(n))) <= 1e-11);
    }
}

TEST_CASE("quadratic convergence table decreases monotonically") {
    const auto sq = quadratic_saddle_problem([](double t) { return t * t; });
    const std::size_t ns[] = {100, 1000, 10000, 100000};
    const auto table = saddle_convergence_check(sq, ns, 1e-13);
    CHECK(table.trend() == 1.0);
    CHECK(table.last_strictly_decreasing(3));
    CHECK(table.rows.back().rel_diff < 0.02);
}

TEST_CASE("bs instance equals the subjective bs price") {
    const double s = 0.0261;
    const auto prob = bs_saddle_problem(0.158 * 0.158, [s](double) { return s; }, bs_call_of_variance);
    for (std::size_t n : {5u, 20u, 150u}) {
        const auto post = BsPosterior::from_statistics(n, s, VariancePrior::noninformative());
        const auto price = subjective_bs_price({OptionKind::call, 100.0, 0.25}, 100.0, 0.002, post, 1e-9);
        CHECK(std::abs(saddle_ratio(prob, n, 1e-9) - price.value) <= 2e-9);
    }
}

TEST_CASE("non-integrable prior needs n >= 5 under the envelope") {
    const double s0sq = 0.158 * 0.158;
    const auto prob = bs_saddle_problem(
        s0sq, [s0sq](double n) { return s0sq * (1.0 + 1.0 / std::sqrt(n)); }, bs_call_of_variance);
    for (std::size_t n : {1u, 2u, 3u, 4u}) {
        CAPTURE(n);
        CHECK_THROWS_AS(saddle_ratio(prob, n, 1e-9), Error);
    }
    const std::size_t ns[] = {5, 10, 100, 1000, 10000, 100000};
    const auto table = saddle_convergence_check(prob, ns, 1e-10);
    for (const auto& r : table.rows) CHECK(std::isfinite(r.subjective));
    CHECK(table.last_strictly_decreasing(3));
    CHECK(table.rows.back().rel_diff < 1e-2);
}

TEST_CASE("saddle problem validation") {
    auto p = quadratic_saddle_problem([](double t) { return t; });
    p.theta0 = 0.5;  // not the minimum of h
    CHECK_THROWS_AS(p.validate(), Error);
    auto q = bs_saddle_problem(0.02, [](double) { return 0.02; }, [](double v) { return v; });
    q.envelope_a.reset();
    CHECK_THROWS_AS(q.validate(), Error);
    CHECK_NOTHROW(quadratic_saddle_problem([](double t) { return t; }).validate());
}

TEST_CASE("convergence table helpers") {
    ConvergenceTable t;
    t.rows = {{1, 2.0, 1.0, 1.0, 0, 0}, {2, 1.5, 1.0, 0.5, 0, 0}, {3, 1.6, 1.0, 0.6, 0, 0}, {4, 1.1, 1.0, 0.1, 0, 0}};
    CHECK(t.trend() == doctest::Approx(2.0 / 3.0));
    CHECK_FALSE(t.last_strictly_decreasing(3));
    CHECK(t.last_strictly_decreasing(2));
    t.rows[2].index = 2.5;
    CHECK_NOTHROW(t.validate());
    t.rows[2].index = 2;
    CHECK_THROWS_AS(t.validate(), Error);
}

TEST_CASE("martingale checks: degenerate posteriors") {
    const auto point = BsPosterior::from_statistics(10000000, 0.158 * 0.158, VariancePrior::noninformative());
    CHECK(martingale_check_bs(point, 100.0, 0.002, 0.25, 200000, 1).pass);
    const auto mpoint = MertonPosterior::from_statistics(100000, 25000.0, 0.0, 0.0025, ThetaPrior::noninformative());
    CHECK(martingale_check_merton(mpoint, 100.0, 0.002, 0.158, 0.25, 200000, 1).pass);
}

TEST_CASE("martingale checks on random posteriors") {
    // 40 independent 3-sigma checks: require the z-scores to look standard
    // rather than every single one to pass.
    rng::Xoshiro256 gen(555);
    std::vector<double> z;
    for (int i = 0; i < 20; ++i) {
        const std::size_t n = 10 + std::size_t(gen.uniform() * 190);
        const double s = 0.005 + 0.1 * gen.uniform();
        const auto post = BsPosterior::from_statistics(n, s, VariancePrior::noninformative());
        const auto r = martingale_check_bs(post, 100.0, 0.002, 0.25, 100000, 100 + i);
        z.push_back((r.estimate - r.s0) / r.std_error);

        const std::size_t jumps = 6 + std::size_t(gen.uniform() * 40);
        const double tau = 1.0 + 9.0 * gen.uniform();
        const auto mp = MertonPosterior::from_statistics(jumps, tau, 0.06 * (gen.uniform() - 0.5),
                                                         0.001 + 0.01 * gen.uniform(), ThetaPrior::noninformative());
        const auto rm = martingale_check_merton(mp, 100.0, 0.002, 0.158, 0.25, 100000, 200 + i);
        z.push_back((rm.estimate - rm.s0) / rm.std_error);
    }
    double mean = 0.0, sq = 0.0;
    int beyond = 0;
    for (double v : z) {
        mean += v / z.size();
        sq += v * v / z.size();
        beyond += std::abs(v) > 3.0;
    }
    CAPTURE(mean);
    CAPTURE(sq);
    // P(Binomial(40, 0.0027) >= 3) < 1e-3; sum of 40 squared N(0,1) exceeds 80 with p < 1e-4
    CHECK(beyond <= 2);
    CHECK(std::abs(mean) <= 3.0 / std::sqrt(double(z.size())));
    CHECK(sq * z.size() <= 80.0);
}

TEST_CASE("martingale check with an artificial truncated prior") {
    const double lam_hat = 4.0;
    const auto upper = ThetaPrior::custom(
        [lam_hat](const MertonTheta& t) { return t.lambda > lam_hat ? 0.0 : -kInf; }, "lambda > lambda_hat");
    const auto post = MertonPosterior::from_statistics(8, 2.0, 0.0, 0.0025, upper);
    CHECK(martingale_check_merton(post, 100.0, 0.002, 0.158, 0.25, 200000, 3).pass);
}

TEST_CASE("martingale checks are bitwise identical serial and parallel") {
    const auto post = BsPosterior::from_statistics(20, 0.025, VariancePrior::noninformative());
    const auto a = martingale_check_bs(post, 100.0, 0.002, 0.25, 50000, 9, Exec::serial);
    const auto b = martingale_check_bs(post, 100.0, 0.002, 0.25, 50000, 9, Exec::parallel);
    CHECK(a.estimate == b.estimate);
    CHECK(a.std_error == b.std_error);
}

TEST_CASE("bs convergence experiment") {
    std::vector<std::uint64_t> seeds;
    for (std::uint64_t s = 1; s <= 20; ++s) seeds.push_back(s);
    const std::size_t ns[] = {5, 20, 150, 1000, 100000};
    const auto serial = bs_convergence_experiment(BsExperiment{}, ns, seeds, Exec::serial);
    const auto parallel = bs_convergence_experiment(BsExperiment{}, ns, seeds, Exec::parallel);
    REQUIRE(serial.rows.size() == 5);
    for (std::size_t i = 0; i < serial.rows.size(); ++i) {
        CHECK(serial.rows[i].subjective == parallel.rows[i].subjective);
        CHECK(serial.rows[i].rel_diff == parallel.rows[i].rel_diff);
        CHECK(serial.rows[i].skipped == 0);
    }
    CHECK(serial.rows.back().rel_diff < 0.005);
    for (std::size_t i = 1; i < serial.rows.size(); ++i) CHECK(serial.rows[i].rel_diff < serial.rows[i - 1].rel_diff);
}

TEST_CASE("merton convergence experiment counts skipped histories") {
    MertonExperiment e;
    e.n_samples = 2000;
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5, 6, 7, 8};
    const double taus[] = {0.25, 2.0, 10.0};
    const auto a = merton_convergence_experiment(e, taus, seeds, Exec::serial);
    const auto b = merton_convergence_experiment(e, taus, seeds, Exec::parallel);
    REQUIRE(a.rows.size() == 3);
    // tau = 0.25 expects one jump, so most histories are improper there
    CHECK(a.rows[0].skipped >= 6);
    CHECK(a.rows[2].skipped == 0);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(a.rows[i].skipped == b.rows[i].skipped);
        if (!std::isnan(a.rows[i].rel_diff)) CHECK(a.rows[i].rel_diff == b.rows[i].rel_diff);
    }
    const double ref = merton_mc_price({OptionKind::call, 100.0, 0.25}, 100.0, 0.002, 0.158, e.theta0, 1e-10).value;
    CHECK(a.rows[1].reference == ref);
}

TEST_CASE("price trace: discontinuities only at jump times, smooth in between") {
    MertonExperiment e;
    e.n_samples = 5000;
    std::vector<double> grid;
    for (int i = 1; i <= 160; ++i) grid.push_back(0.025 * i);
    const auto trace = merton_price_trace(e, grid, 4);
    // between jumps a step moves the price by < 0.65 of its 3-sigma error
    const auto disc = detect_discontinuities(trace, 2.0);
    CHECK_FALSE(disc.empty());
    auto has_jump = [&](std::size_t i) {
        for (double t : trace.jumps.jump_times) {
            if (-t > grid[i - 1] && -t <= grid[i]) return true;
        }
        return false;
    };
    for (std::size_t i : disc) CHECK(has_jump(i));
    for (std::size_t i = 1; i < grid.size(); ++i) {
        if (std::isnan(trace.prices[i]) || std::isnan(trace.prices[i - 1]) || has_jump(i)) continue;
        CHECK(std::abs(trace.prices[i] - trace.prices[i - 1]) < std::max(trace.errors[i], trace.errors[i - 1]));
    }
    // windows with fewer than four jumps have no proper posterior
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const bool proper = trace.jumps.restricted(grid[i]).count() >= MertonPosterior::kMinJumps;
        CHECK(std::isnan(trace.prices[i]) == !proper);
    }
}

TEST_CASE("detect_discontinuities on a synthetic trace") {
    PriceTrace t;
    t.taus = {1, 2, 3, 4, 5};
    t.prices = {std::nan(""), 1.0, 1.001, 1.5, 1.501};
    t.errors = {std::nan(""), 0.01, 0.01, 0.01, 0.01};
    const auto d = detect_discontinuities(t, 10.0);
    REQUIRE(d.size() == 1);
    CHECK(d[0] == 3);
}
