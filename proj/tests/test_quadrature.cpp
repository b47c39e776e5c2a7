#include <doctest.h>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include <cmath>
#include <numbers>

#include "bq/errors.hpp"
#include "bq/quadrature.hpp"

using namespace bq;

TEST_CASE("finite interval integrals against boost quadrature") {
    auto f1 = [](double x) { return std::sin(x) / (1.0 + x * x); };
    boost::math::quadrature::tanh_sinh<double> ts;
    const double ref1 = ts.integrate(f1, 0.0, std::numbers::pi);
    const auto r1 = integrate_adaptive(f1, 0.0, std::numbers::pi, 0.0, 1e-13);
    CHECK(r1.converged);
    CHECK(std::abs(r1.value - ref1) <= 1e-12);
    CHECK(r1.abs_error_estimate <= 1e-13 * std::abs(r1.value) + 1e-300);

    // integrable endpoint singularity
    auto f2 = [](double x) { return std::sqrt(x) * std::log(x); };
    const auto r2 = integrate_adaptive(f2, 0.0, 1.0, 0.0, 1e-10);
    CHECK(r2.converged);
    CHECK(std::abs(r2.value + 4.0 / 9.0) <= 1e-9);
}

TEST_CASE("infinite ranges") {
    auto g = [](double x) { return std::exp(-x * x); };
    const auto r = integrate_adaptive(g, -kInf, kInf, 0.0, 1e-12);
    CHECK(r.converged);
    CHECK(std::abs(r.value - std::sqrt(std::numbers::pi)) <= 1e-11);

    auto h = [](double x) { return 1.0 / (1.0 + x * x); };
    const auto upper = integrate_adaptive(h, 1.0, kInf, 0.0, 1e-12);
    CHECK(std::abs(upper.value - std::numbers::pi / 4.0) <= 1e-11);
    const auto lower = integrate_adaptive(h, -kInf, -1.0, 0.0, 1e-12);
    CHECK(std::abs(lower.value - std::numbers::pi / 4.0) <= 1e-11);

    auto k = [](double x) { return std::exp(-x) * x * x; };
    boost::math::quadrature::exp_sinh<double> es;
    const auto rk = integrate_adaptive(k, 0.0, kInf, 0.0, 1e-12);
    CHECK(std::abs(rk.value - es.integrate(k)) <= 1e-11);
}

TEST_CASE("breakpoints overload") {
    auto f = [](double x) { return std::abs(x - 0.3); };
    const std::array<double, 3> bp{0.0, 0.3, 1.0};
    const auto r = integrate_adaptive(f, bp, 0.0, 1e-14);
    CHECK(r.converged);
    CHECK(std::abs(r.value - (0.045 + 0.245)) <= 1e-14);
}

TEST_CASE("subdivision limit reports non-convergence") {
    auto f = [](double x) { return 1.0 / std::sqrt(std::abs(x - 0.3)); };
    const auto r = integrate_adaptive(f, 0.0, 1.0, 0.0, 1e-14, 3);
    CHECK_FALSE(r.converged);
    CHECK(std::isfinite(r.value));
}

TEST_CASE("log-density integral of an inverse-gamma kernel") {
    // int v^-5 exp(-0.1/v) dv = Gamma(4) / 0.1^4
    auto log_f = [](double v) { return -5.0 * std::log(v) - 0.1 / v; };
    const auto r = integrate_log_density(log_f, {}, Bracket{0.0, kInf}, 1e-10);
    CHECK(r.converged);
    CHECK(std::exp(r.log_z) == doctest::Approx(60000.0).epsilon(1e-10));
    CHECK(r.ratio == 1.0);
    CHECK(r.mode == doctest::Approx(0.02).epsilon(1e-4));

    // E[v] = scale / (shape - 1) = 0.1 / 3
    const auto m = integrate_log_density(log_f, [](double v) { return v; }, Bracket{0.0, kInf}, 1e-12);
    CHECK(m.converged);
    CHECK(std::abs(m.ratio - 0.1 / 3.0) <= m.ratio_error + 1e-15);
    CHECK(std::abs(m.ratio - 0.1 / 3.0) <= 1e-12);
}

TEST_CASE("constant g cancels exactly") {
    auto log_f = [](double x) { return -0.5 * 1e4 * (x - 1.0) * (x - 1.0); };
    for (double c : {1.0, -3.25, 1e-7}) {
        const auto r = integrate_log_density(log_f, [c](double) { return c; }, Bracket{0.0, 2.0}, 1e-12);
        CHECK(std::abs(r.ratio - c) <= 1e-12 * std::abs(c));
    }
}

TEST_CASE("huge log scale is handled by the max shift") {
    auto log_f = [](double x) { return 1000.0 - 0.5 * x * x; };
    LogDensityOptions opts;
    opts.scout = Bracket{-10.0, 10.0};
    const auto r = integrate_log_density(log_f, {}, Bracket{-kInf, kInf}, 1e-10, opts);
    CHECK(r.converged);
    CHECK(r.log_z == doctest::Approx(1000.0 + 0.5 * std::log(2.0 * std::numbers::pi)).epsilon(1e-12));
}

TEST_CASE("density with no mass on the scouting grid is rejected") {
    auto dead = [](double) { return -kInf; };
    CHECK_THROWS_AS(integrate_log_density(dead, {}, Bracket{0.0, 1.0}, 1e-8), Error);
    try {
        (void)integrate_log_density(dead, {}, Bracket{0.0, 1.0}, 1e-8);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::degenerate_density);
    }
}

TEST_CASE("expectation_1d") {
    auto log_f = [](double x) { return -std::abs(x); };  // Laplace density
    const auto r = expectation_1d([](double x) { return x * x; }, log_f, Bracket{-60.0, 60.0}, 1e-10);
    CHECK(r.converged);
    CHECK(std::abs(r.value - 2.0) <= 1e-9);
}
