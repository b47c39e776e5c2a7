#include <doctest.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/poisson.hpp>

#include <cmath>
#include <vector>

#include "bq/bayes_engine.hpp"
#include "bq/errors.hpp"
#include "bq/market_sim.hpp"

using namespace bq;

TEST_CASE("zero volatility gives the pure drift path") {
    const auto grid = make_grid(1.0, 0.01);
    const auto s = simulate_bs_path({100.0, 0.03, 0.0}, grid, 5);
    for (std::size_t j = 0; j < s.size(); ++j) {
        CHECK(s.quotes[j] == doctest::Approx(100.0 * std::exp(0.03 * grid[j])).epsilon(1e-14));
    }
    CHECK(s.quotes.back() == 100.0);
}

TEST_CASE("same seed gives a bitwise identical series") {
    const auto grid = make_grid(0.5, 1.0 / 252);
    const auto a = simulate_bs_path({100.0, 0.002, 0.158}, grid, 17);
    const auto b = simulate_bs_path({100.0, 0.002, 0.158}, grid, 17);
    CHECK(a.quotes == b.quotes);
    CHECK(a.times == b.times);
    const auto c = simulate_bs_path({100.0, 0.002, 0.158}, grid, 18);
    CHECK(a.quotes != c.quotes);
}

TEST_CASE("normalized increments have variance sigma^2") {
    const std::size_t n = 100000;
    const double dt = 1.0 / 252;
    const double sigma = 0.158;
    const auto grid = make_grid(n * dt, dt);
    REQUIRE(grid.size() == n + 1);
    const auto s = simulate_bs_path({100.0, 0.002, sigma}, grid, 3);
    const auto x = log_returns(s, 0.002);
    double ss = 0.0;
    for (double v : x) ss += v * v;
    const double var = ss / n;
    CHECK(std::abs(var - sigma * sigma) < 3.0 * sigma * sigma * std::sqrt(2.0 / n));
}

TEST_CASE("grid validation") {
    const std::vector<double> bad{-1.0, -0.5, -0.5, 0.0};
    CHECK_THROWS_AS(simulate_bs_path({100.0, 0.0, 0.2}, bad, 1), Error);
    const std::vector<double> empty;
    CHECK_THROWS_AS(simulate_bs_path({100.0, 0.0, 0.2}, empty, 1), Error);
    CHECK_THROWS_AS(make_grid(0.0, 0.1), Error);
    CHECK_THROWS_AS(simulate_merton_path({100.0, 0.0, 0.2}, {4.0, 0.0025, 0.0}, -1.0, 0.01, 1),
                    Error);
    CHECK_THROWS_AS(simulate_merton_path({100.0, 0.0, 0.2}, {4.0, 0.0025, 0.0}, 1.0, 0.0, 1),
                    Error);
}

TEST_CASE("subsample keeps every k-th point and the final one") {
    const auto grid = make_grid(10.0, 1.0);
    const auto s = simulate_bs_path({100.0, 0.0, 0.2}, grid, 2);
    REQUIRE(s.size() == 11);
    const auto same = subsample(s, 1);
    CHECK(same.quotes == s.quotes);
    const auto k5 = subsample(s, 5);
    REQUIRE(k5.size() == 3);
    CHECK(k5.times[0] == s.times[0]);
    CHECK(k5.times[1] == s.times[5]);
    CHECK(k5.times[2] == s.times[10]);
    CHECK(log_returns(k5, 0.0).size() == 2);
    CHECK_THROWS_AS(subsample(s, 0), Error);
}

TEST_CASE("merton path equals the bs path with the same draws times the jump factor") {
    const BsParams bs{100.0, 0.002, 0.158};
    const MertonTheta theta{4.0, 0.0025, 0.01};
    const auto path = simulate_merton_path(bs, theta, 2.0, 1.0 / 252, 11);
    const auto plain = simulate_bs_path(bs, make_grid(2.0, 1.0 / 252), 11);
    REQUIRE(path.series.size() == plain.size());
    const auto& jt = path.jumps.jump_times;
    for (std::size_t j = 0; j < plain.size(); ++j) {
        double later = 0.0;  // jumps in (t_j, 0]
        for (std::size_t k = 0; k < jt.size(); ++k) {
            if (jt[k] > plain.times[j]) later += path.jumps.jump_sizes[k];
        }
        CHECK(path.series.quotes[j] * std::exp(later) ==
              doctest::Approx(plain.quotes[j]).epsilon(1e-12));
        CHECK(path.series.quotes[j] > 0.0);
    }
}

TEST_CASE("zero intensity gives an empty jump record") {
    const auto rec = simulate_jump_record({0.0, 0.0025, 0.0}, 5.0, 1);
    CHECK(rec.count() == 0);
}

TEST_CASE("jump counts are Poisson(lambda tau)") {
    const std::size_t runs = 10000;
    const MertonTheta theta{4.0, 0.0025, 0.0};
    std::vector<double> counts(runs);
    double mean = 0.0;
    for (std::size_t i = 0; i < runs; ++i) {
        const auto rec = simulate_jump_record(theta, 2.0, 1000 + i);
        rec.validate();
        counts[i] = double(rec.count());
        mean += counts[i];
    }
    mean /= runs;
    CHECK(std::abs(mean - 8.0) < 3.0 * std::sqrt(8.0 / runs));

    // Chi-square goodness of fit on bins 0..3, 4, ..., 13, >= 14.
    const boost::math::poisson_distribution<> pois(8.0);
    std::vector<double> observed(12, 0.0);
    for (double c : counts) {
        const int bin = c <= 3 ? 0 : (c >= 14 ? 11 : int(c) - 3);
        observed[bin] += 1.0;
    }
    double chi2 = 0.0;
    for (int b = 0; b < 12; ++b) {
        double p;
        if (b == 0) p = boost::math::cdf(pois, 3.0);
        else if (b == 11) p = boost::math::cdf(boost::math::complement(pois, 13.0));
        else p = boost::math::pdf(pois, double(b + 3));
        const double expected = p * runs;
        chi2 += (observed[b] - expected) * (observed[b] - expected) / expected;
    }
    const boost::math::chi_squared_distribution<> ref(11.0);
    CHECK(chi2 < boost::math::quantile(ref, 0.999));
}

TEST_CASE("jump sizes have mean m") {
    const MertonTheta theta{100.0, 0.0025, 0.1};
    const auto rec = simulate_jump_record(theta, 2.0, 8);
    REQUIRE(rec.count() >= 100);
    double mean = 0.0;
    for (double y : rec.jump_sizes) mean += y;
    mean /= double(rec.count());
    CHECK(std::abs(mean - 0.1) < 3.0 * 0.05 / std::sqrt(double(rec.count())));
    for (std::size_t i = 1; i < rec.count(); ++i) CHECK(rec.jump_times[i] > rec.jump_times[i - 1]);
    CHECK(rec.jump_times.front() >= -2.0);
    CHECK(rec.jump_times.back() <= 0.0);
}

TEST_CASE("restricted record keeps the jumps of the shorter window") {
    const auto rec = simulate_jump_record({4.0, 0.0025, 0.0}, 5.0, 21);
    const auto win = rec.restricted(2.0);
    CHECK(win.tau == 2.0);
    for (double t : win.jump_times) CHECK(t >= -2.0);
    std::size_t expected = 0;
    for (double t : rec.jump_times) expected += t >= -2.0 ? 1 : 0;
    CHECK(win.count() == expected);
    CHECK_THROWS_AS(rec.restricted(6.0), Error);
}
