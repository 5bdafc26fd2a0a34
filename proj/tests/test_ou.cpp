#include <doctest.h>

#include <cmath>

#include "oracle_values.hpp"
#include "refctl/errors.hpp"
#include "refctl/ou.hpp"

using namespace refctl;

TEST_CASE("cylinder function matches the high-precision reference") {
    for (const auto& c : oracle::kCylinder) {
        INFO("nu = " << c.nu << ", x = " << c.x);
        CHECK(cylinder_D(c.nu, c.x) == doctest::Approx(c.value).epsilon(1e-12));
        CHECK(log_cylinder_D(c.nu, c.x) == doctest::Approx(std::log(c.value)).epsilon(1e-12));
    }
    CHECK(cylinder_D(-1.0, 0.0) == doctest::Approx(std::sqrt(M_PI / 2)).epsilon(1e-14));
}

TEST_CASE("cylinder function satisfies the Weber equation and decays") {
    const double h = 1e-3;
    for (double nu : {-1.05, -2.3}) {
        for (double x : {-2.0, 0.0, 1.0, 3.0}) {
            const double f = cylinder_D(nu, x);
            const double fpp = (cylinder_D(nu, x + h) - 2 * f + cylinder_D(nu, x - h)) / (h * h);
            const double term = (nu + 0.5 - x * x / 4) * f;
            CHECK(std::abs(fpp + term) < 1e-6 * (std::abs(fpp) + std::abs(term)));
        }
        double prev = cylinder_D(nu, 5.0);
        for (double x = 6.0; x <= 40.0; x += 1.0) {
            const double cur = cylinder_D(nu, x);
            CHECK(cur < prev);
            CHECK(cur > 0.0);
            prev = cur;
        }
    }
    CHECK_THROWS_AS(cylinder_D(0.5, 1.0), InputError);
}

TEST_CASE("closed-form OU basis is monotone and solves the companion equation") {
    const OUParams p;
    const auto basis = ou_hat_basis(p, p.default_grid());
    const auto& d = basis.diagnostics();
    CHECK(d.monotone());
    CHECK(d.hat_ode_residual_max < 1e-8);
    CHECK(d.hat_wronskian_rel_std < 1e-8);
    for (double x = 0.0; x < 3.0; x += 0.1) {
        CHECK(basis.hat_psi_at(x + 0.1) > basis.hat_psi_at(x));
        CHECK(basis.hat_phi_at(x + 0.1) < basis.hat_phi_at(x));
    }
}

TEST_CASE("OU boundary reproduces the reported band") {
    const OUParams p;
    const double b = solve_ou_boundary(p);
    CHECK(std::abs(b - 0.91) <= 0.01);
    CHECK(b == doctest::Approx(oracle::kOuBStar).epsilon(1e-9));
    const double b_generic = solve_ou_boundary(p, compute_basis(p.diffusion(), p.r, p.default_grid()));
    CHECK(std::abs(b - b_generic) < 1e-4);
}

TEST_CASE("theta sweep reproduces the reported table") {
    const double reported[] = {1.61, 1.22, 1.03, 0.91, 0.82, 0.75, 0.70, 0.66};
    const OUParams base;
    const std::vector<double> thetas(std::begin(oracle::kThetaSweep), std::end(oracle::kThetaSweep));
    SweepOptions opt;
    opt.threads = 4;
    const auto table = sensitivity_sweep(base, SweepParameter::Theta, thetas, opt);
    REQUIRE(table.all_rows_ok());
    for (std::size_t i = 0; i < thetas.size(); ++i) {
        CHECK(std::abs(table.rows[i].b_star - reported[i]) <= 0.01);
        CHECK(table.rows[i].b_star == doctest::Approx(oracle::kThetaSweepBStar[i]).epsilon(1e-8));
    }
    CHECK(table.asserted_verdicts_hold());
}

TEST_CASE("five-point sweeps show the proven monotonicities") {
    const OUParams base;
    SweepOptions opt;
    opt.threads = 4;
    opt.cells = 2000;
    struct Case {
        SweepParameter param;
        std::vector<double> values;
    };
    const Case cases[] = {
        {SweepParameter::Sigma, {0.5, 0.7, 0.894427190999915878, 1.1, 1.4}},
        {SweepParameter::Kappa, {0.6, 0.8, 1.0, 1.5, 2.0}},
        {SweepParameter::Eta0, {0.2, 0.3, 0.5, 0.7, 0.9}},
        {SweepParameter::Theta, {0.5, 0.75, 1.0, 1.5, 2.0}},
    };
    for (const auto& c : cases) {
        INFO(sweep_parameter_name(c.param));
        const auto table = sensitivity_sweep(base, c.param, c.values, opt);
        REQUIRE(table.all_rows_ok());
        CHECK(table.asserted_verdicts_hold());
        for (const auto& v : table.verdicts)
            if (v.asserted) CHECK(v.holds);
    }
}

TEST_CASE("large-volatility rows solve on the default grid") {
    // Regression: the cylinder quadrature used to stop one rounding error
    // short of its tolerance at sigma = 1.4.
    const auto table = sensitivity_sweep(OUParams{}, SweepParameter::Sigma, {1.4, 2.0, 3.0});
    for (const auto& row : table.rows) {
        INFO(row.error);
        CHECK(row.ok);
    }
    CHECK(table.asserted_verdicts_hold());
}

TEST_CASE("with constant reward the band depends on kappa and eta0 only through their ratio") {
    OUParams a;
    OUParams b;
    b.kappa = 0.5 * a.kappa;
    b.eta0 = 0.5 * a.eta0;
    CHECK(solve_ou_boundary(a) == doctest::Approx(solve_ou_boundary(b)).epsilon(1e-10));
    OUParams c;
    c.eta0 = 0.7;  // same kappa, larger eta0: smaller kappa/eta0, narrower band
    CHECK(solve_ou_boundary(c) < solve_ou_boundary(a));
}

TEST_CASE("sweep rows that violate kappa > eta0 are recorded as failures") {
    const OUParams base;
    const auto table = sensitivity_sweep(base, SweepParameter::Eta0, {0.3, 1.2});
    REQUIRE(table.rows.size() == 2);
    CHECK(table.rows[0].ok);
    CHECK_FALSE(table.rows[1].ok);
    CHECK_FALSE(table.rows[1].error.empty());
    CHECK_FALSE(table.all_rows_ok());
    CHECK_THROWS_AS(parse_sweep_parameter("mu"), InputError);
}
