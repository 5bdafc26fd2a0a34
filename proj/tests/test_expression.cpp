#include <doctest.h>

#include <cmath>

#include "refctl/diffusion.hpp"
#include "refctl/errors.hpp"
#include "refctl/expression.hpp"
#include "refctl/quadrature.hpp"

using namespace refctl;

TEST_CASE("expression evaluates with precedence and functions") {
    const auto e = Expression::parse("1 + 2*x^2 - exp(-x)/2");
    CHECK(e(0.0) == doctest::Approx(0.5));
    CHECK(e(1.5) == doctest::Approx(1 + 2 * 2.25 - std::exp(-1.5) / 2));
    CHECK(Expression::parse("-x^2")(3.0) == doctest::Approx(-9.0));
    CHECK(Expression::parse("2^3^2")(0.0) == doctest::Approx(512.0));
    CHECK(Expression::parse("sqrt(pi)*e")(0.0) == doctest::Approx(std::sqrt(M_PI) * M_E));
}

TEST_CASE("symbolic derivative matches hand derivative") {
    const auto e = Expression::parse("x*sin(x) + log(1 + x^2)");
    const auto d = e.derivative();
    for (double x : {-1.3, 0.0, 0.7, 2.4}) {
        const double exact = std::sin(x) + x * std::cos(x) + 2 * x / (1 + x * x);
        CHECK(d(x) == doctest::Approx(exact).epsilon(1e-14));
    }
}

TEST_CASE("affine expressions are detected through constant folding") {
    auto f = SmoothFunction::parse("0.1 - 2*x");
    REQUIRE(f.affine_form().has_value());
    CHECK(f.affine_form()->intercept == doctest::Approx(0.1));
    CHECK(f.affine_form()->slope == doctest::Approx(-2.0));
    CHECK(f.d2(3.0) == 0.0);
    CHECK_FALSE(SmoothFunction::parse("x*x").affine_form().has_value());
}

TEST_CASE("malformed expressions raise InputError") {
    CHECK_THROWS_AS(Expression::parse("1 +"), InputError);
    CHECK_THROWS_AS(Expression::parse("foo(x)"), InputError);
    CHECK_THROWS_AS(Expression::parse("(x"), InputError);
    CHECK_THROWS_AS(Expression::parse("y"), InputError);
}

TEST_CASE("finite-difference fallback is flagged and accurate") {
    auto f = SmoothFunction::from_callable([](double x) { return std::exp(0.5 * x); });
    CHECK(f.uses_finite_differences());
    CHECK(f.d1(1.0) == doctest::Approx(0.5 * std::exp(0.5)).epsilon(1e-7));
    CHECK(f.d2(1.0) == doctest::Approx(0.25 * std::exp(0.5)).epsilon(1e-4));
}

TEST_CASE("grid contains zero and locates cells") {
    auto g = Grid::uniform(-1.0, 2.0, 30);
    CHECK(g[g.zero_index()] == 0.0);
    CHECK(g.x_lo() == -1.0);
    CHECK(g.x_hi() == 2.0);
    const auto i = g.locate(0.55);
    CHECK(g[i] <= 0.55);
    CHECK(g[i + 1] >= 0.55);
    CHECK_THROWS_AS(Grid({0.5, 1.0}), InputError);
    CHECK_THROWS_AS(Grid({-1.0, 0.0, 0.0, 1.0}), InputError);
    auto geo = Grid::geometric(-2.0, 5.0, 0.01, 1.05);
    CHECK(geo[geo.zero_index()] == 0.0);
    CHECK(geo.x_hi() == 5.0);
}

TEST_CASE("scale density of drifted Brownian motion is exponential") {
    auto spec = DiffusionSpec::brownian(1.0, 1.0);
    for (double x : {-0.5, 0.0, 1.0, 2.0})
        CHECK(scale_density(spec, x) == doctest::Approx(std::exp(-2.0 * x)).epsilon(1e-12));
    CHECK(speed_density(spec, 1.0) == doctest::Approx(2.0 * std::exp(2.0)).epsilon(1e-12));
}

TEST_CASE("OU diffusion passes the standing assumptions") {
    auto spec = DiffusionSpec::ornstein_uhlenbeck(0.1, 1.0, std::sqrt(0.8));
    auto [lo, hi] = default_domain(spec, 0.05);
    CHECK(lo < 0.0);
    CHECK(hi > 3.0);
    auto rep = validate_assumptions(spec, 0.05, Grid::uniform(lo, hi, 200));
    CHECK(rep.passed());
    CHECK(rep.min_r_minus_mu_prime == doctest::Approx(1.05));
    auto bad = validate_assumptions(DiffusionSpec::from_expressions("x", "1"), 0.5, Grid::uniform(-1, 1, 20));
    CHECK_FALSE(bad.discount_ok);
}

TEST_CASE("adaptive quadrature integrates a Gaussian") {
    const double v = integrate([](double t) { return std::exp(-t * t / 2); }, 0.0, 12.0);
    CHECK(v == doctest::Approx(std::sqrt(M_PI / 2)).epsilon(1e-12));
    CHECK(integrate([](double t) { return t; }, 1.0, 0.0) == doctest::Approx(-0.5));
}
