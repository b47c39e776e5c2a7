#include <doctest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <numbers>

#include "bq/analytic_pricing.hpp"
#include "bq/errors.hpp"
#include "bq/rng.hpp"

using namespace bq;

namespace {

constexpr double kS0 = 100.0;
constexpr double kRho = 0.002;
constexpr double kSigma = 0.158;
constexpr double kT = 0.25;
const OptionSpec kCall{OptionKind::call, 100.0, kT};
const OptionSpec kPut{OptionKind::put, 100.0, kT};

double parity_rhs(double s0, double k, double rho, double t) { return s0 - k * std::exp(-rho * t); }

}  // namespace

TEST_CASE("norm_cdf basics") {
    CHECK(norm_cdf(0.0) == 0.5);
    CHECK(std::abs(norm_cdf(8.0) - 1.0) <= 1e-12);
    for (double x = -9.0; x <= 9.0; x += 0.37) {
        CHECK(std::abs(norm_cdf(-x) - (1.0 - norm_cdf(x))) <= 1e-15);
        CHECK(norm_cdf(x + 0.01) >= norm_cdf(x));
    }
}

TEST_CASE("norm_cdf(1) against quadrature of the normal density") {
    auto pdf = [](double t) { return std::exp(-0.5 * t * t) / std::sqrt(2.0 * std::numbers::pi); };
    const double tail = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
        pdf, -std::numeric_limits<double>::infinity(), 1.0, 20, 1e-15);
    CHECK(std::abs(norm_cdf(1.0) - tail) <= 1e-12);
    // 50-digit reference
    CHECK(std::abs(norm_cdf(1.0) - 0.8413447460685429485852325456) <= 1e-15);
}

TEST_CASE("bs_price matches high-precision reference values") {
    const auto c = bs_price(kCall, kS0, kRho, kSigma);
    const auto p = bs_price(kPut, kS0, kRho, kSigma);
    CHECK(c.value == doctest::Approx(3.175093948530422958551204481).epsilon(1e-13));
    CHECK(p.value == doctest::Approx(3.125106446447350015845041132).epsilon(1e-13));
    CHECK(c.abs_error_estimate <= 1e-10);
    CHECK(c.method == PriceMethod::closed_form);
}

TEST_CASE("bs_price near-zero strike is the spot") {
    const auto c = bs_price({OptionKind::call, 1e-12, kT}, kS0, kRho, kSigma);
    CHECK(std::abs(c.value - kS0) <= 1e-8);
}

TEST_CASE("bs_price rejects nonpositive volatility") {
    CHECK_THROWS_AS(bs_price(kCall, kS0, kRho, 0.0), Error);
    CHECK_THROWS_AS(bs_price(kCall, kS0, kRho, -0.1), Error);
    CHECK_THROWS_AS(bs_price({OptionKind::call, -1.0, kT}, kS0, kRho, kSigma), Error);
}

TEST_CASE("bs put-call parity, bounds and monotonicity on a random grid") {
    rng::Xoshiro256 gen(2024);
    for (int i = 0; i < 1000; ++i) {
        const double s0 = 20.0 + 180.0 * gen.uniform();
        const double k = 20.0 + 180.0 * gen.uniform();
        const double t = 0.01 + 3.0 * gen.uniform();
        const double rho = -0.02 + 0.1 * gen.uniform();
        const double sigma = 0.02 + 0.8 * gen.uniform();
        const double c = bs_price({OptionKind::call, k, t}, s0, rho, sigma).value;
        const double p = bs_price({OptionKind::put, k, t}, s0, rho, sigma).value;
        CHECK(std::abs(c - p - parity_rhs(s0, k, rho, t)) <= 1e-10);
        CHECK(c >= 0.0);
        CHECK(p >= 0.0);
        CHECK(c <= std::max(s0, k));
        CHECK(p <= std::max(s0, k));
        CHECK(bs_price({OptionKind::call, k * 1.01, t}, s0, rho, sigma).value <= c + 1e-12);
        CHECK(bs_price({OptionKind::call, k, t}, s0, rho, sigma * 1.01).value >= c - 1e-12);
    }
}

TEST_CASE("bs_price agrees with the risk-neutral Monte Carlo oracle") {
    const auto mc = mc_oracle_price(kCall, kS0, kRho, kSigma, {0.0, 0.0, 0.0}, 1000000, 5);
    const double c = bs_price(kCall, kS0, kRho, kSigma).value;
    CHECK(std::abs(mc.value - c) <= mc.abs_error_estimate);
    CHECK(mc.abs_error_estimate == doctest::Approx(3.0 * mc.diagnostics.at("stderr")));
}

TEST_CASE("mc_drift") {
    CHECK(mc_drift({0.0, 0.0025, 0.3}, kSigma) == -0.5 * kSigma * kSigma);
    CHECK(std::abs(mc_drift({4.0, 0.0025, -0.00125}, kSigma) + 0.5 * kSigma * kSigma) <= 1e-17);
    const double mu = mc_drift({4.0, 0.0025, 0.0}, kSigma);
    CHECK(mu == doctest::Approx(-0.01748512630249033612145696427).epsilon(1e-14));

    // E[e^Y] - 1 by Monte Carlo
    rng::Xoshiro256 gen(9);
    const std::size_t n = 1000000;
    double s = 0.0, ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double v = std::expm1(0.05 * gen.normal());
        s += v;
        ss += v * v;
    }
    const double mean = s / n;
    const double se = std::sqrt((ss / n - mean * mean) / n);
    const double implied = -(mu + 0.5 * kSigma * kSigma) / 4.0;
    CHECK(std::abs(mean - implied) <= 3.0 * se);
}

TEST_CASE("merton series reduces to bs at zero intensity") {
    const auto r = merton_mc_price(kCall, kS0, kRho, kSigma, {0.0, 0.0025, 0.0}, 1e-10);
    CHECK(std::abs(r.value - bs_price(kCall, kS0, kRho, kSigma).value) <= 1e-12);
    CHECK(r.diagnostics.at("terms") == 1.0);
}

TEST_CASE("merton series reference values") {
    const MertonTheta theta{4.0, 0.0025, 0.0};
    const auto c = merton_mc_price(kCall, kS0, kRho, kSigma, theta, 1e-12);
    const auto p = merton_mc_price(kPut, kS0, kRho, kSigma, theta, 1e-12);
    CHECK(std::abs(c.value - 3.717190524504128473582181340) <= 1e-11);
    CHECK(std::abs(p.value - 3.667203022421055530876017991) <= 1e-11);
    CHECK(c.diagnostics.at("tail_bound") < 1e-12);
    CHECK(c.method == PriceMethod::series);

    const auto cl = merton_mc_price(kCall, kS0, kRho, kSigma, theta, 1e-12, SeriesForm::classical);
    CHECK(std::abs(cl.value - 3.717786889143090769594972627) <= 1e-11);

    const MertonTheta shifted{4.0, 0.0025, 0.05};
    const auto cs = merton_mc_price(kCall, kS0, kRho, kSigma, shifted, 1e-12);
    const auto cc = merton_mc_price(kCall, kS0, kRho, kSigma, shifted, 1e-12, SeriesForm::classical);
    CHECK(std::abs(cs.value - 3.741313975465449081967393146) <= 1e-11);
    CHECK(std::abs(cc.value - 4.238969648335551133135674791) <= 1e-11);
}

TEST_CASE("merton series parity with m = 0") {
    for (double lambda : {0.5, 4.0, 20.0}) {
        for (double k : {70.0, 100.0, 130.0}) {
            const MertonTheta theta{lambda, 0.01, 0.0};
            const double tol = 1e-10;
            const double c = merton_mc_price({OptionKind::call, k, kT}, kS0, kRho, kSigma, theta, tol).value;
            const double p = merton_mc_price({OptionKind::put, k, kT}, kS0, kRho, kSigma, theta, tol).value;
            CHECK(std::abs(c - p - parity_rhs(kS0, k, kRho, kT)) <= tol);
            CHECK(c >= 0.0);
            CHECK(c <= std::max(kS0, k));
        }
    }
}

TEST_CASE("shifted strike at or below zero is a domain error naming the term") {
    const MertonTheta theta{4.0, 0.0025, 0.6};
    try {
        (void)merton_mc_price({OptionKind::call, 1.0, kT}, kS0, kRho, kSigma, theta, 1e-10);
        FAIL("expected SeriesDomainError");
    } catch (const SeriesDomainError& e) {
        CHECK(e.term() == 2);
        CHECK(e.shifted_strike() == doctest::Approx(1.0 - 2 * 0.6));
        CHECK(e.kind() == ErrorKind::domain);
    }
    const auto ev = merton_series(OptionKind::call, kS0, 1.0, kT, kRho, kSigma, theta, 1e-10,
                                  SeriesForm::strike_shift);
    CHECK(ev.bad_term == 2);
}

TEST_CASE("oracle martingale identity and zero-intensity reduction") {
    for (double sigma : {0.1, 0.3}) {
        for (const MertonTheta& theta :
             {MertonTheta{0.0, 0.0, 0.0}, MertonTheta{4.0, 0.0025, 0.0}, MertonTheta{2.0, 0.02, -0.05}}) {
            const auto fwd = mc_oracle_price({OptionKind::call, 0.0, kT}, kS0, kRho, sigma, theta,
                                             200000, 31);
            CHECK(std::abs(fwd.value - kS0) <= fwd.abs_error_estimate);
        }
    }
    CHECK_THROWS_AS(mc_oracle_price(kCall, kS0, kRho, kSigma, {0.0, 0.0, 0.0}, 100, 1), Error);
}

TEST_CASE("oracle is self-consistent across disjoint seeds") {
    const MertonTheta theta{4.0, 0.0025, 0.0};
    const auto a = mc_oracle_price(kCall, kS0, kRho, kSigma, theta, 500000, 1);
    const auto b = mc_oracle_price(kCall, kS0, kRho, kSigma, theta, 500000, 2);
    const double se = std::hypot(a.diagnostics.at("stderr"), b.diagnostics.at("stderr"));
    CHECK(std::abs(a.value - b.value) <= 3.0 * se);
}

TEST_CASE("oracle is bitwise identical serial and parallel") {
    const MertonTheta theta{4.0, 0.0025, 0.01};
    const auto s = mc_oracle_price(kCall, kS0, kRho, kSigma, theta, 100000, 3, Exec::serial);
    const auto p = mc_oracle_price(kCall, kS0, kRho, kSigma, theta, 100000, 3, Exec::parallel);
    CHECK(s.value == p.value);
    CHECK(s.diagnostics.at("stderr") == p.diagnostics.at("stderr"));
}

TEST_CASE("merton series with m = 0 agrees with the oracle at 10^6 paths") {
    std::uint64_t seed = 100;
    for (double lambda : {0.5, 4.0}) {
        for (double d2 : {0.0025, 0.01}) {
            const MertonTheta theta{lambda, d2, 0.0};
            const auto series = merton_mc_price(kCall, kS0, kRho, kSigma, theta, 1e-10);
            const auto mc = mc_oracle_price(kCall, kS0, kRho, kSigma, theta, 1000000, ++seed);
            CAPTURE(lambda);
            CAPTURE(d2);
            CHECK(std::abs(series.value - mc.value) <= mc.abs_error_estimate);
        }
    }
}

TEST_CASE("classical series agrees with the oracle for m != 0") {
    const MertonTheta theta{4.0, 0.0025, 0.05};
    const auto cl = merton_mc_price(kCall, kS0, kRho, kSigma, theta, 1e-10, SeriesForm::classical);
    const auto mc = mc_oracle_price(kCall, kS0, kRho, kSigma, theta, 2000000, 77);
    CHECK(std::abs(cl.value - mc.value) <= mc.abs_error_estimate);
}
