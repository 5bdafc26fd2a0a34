#include <doctest.h>

#include <cmath>

#include "oracle_values.hpp"
#include "refctl/free_boundary.hpp"
#include "refctl/fundamental.hpp"
#include "refctl/ou.hpp"
#include "refctl/reward.hpp"

using namespace refctl;

namespace {

struct BM {
    DiffusionSpec spec = DiffusionSpec::brownian(1.0, 1.0);
    double r = 0.5;
    Grid grid = [this] {
        auto [lo, hi] = default_domain(spec, r);
        return Grid::uniform(lo, hi, 3000);
    }();
    FundamentalBasis basis = compute_basis(spec, r, grid);
};

const BM& bm() {
    static const BM instance;
    return instance;
}

const FundamentalBasis& ou_generic() {
    static const OUParams p;
    static const FundamentalBasis b = compute_basis(p.diffusion(), p.r, p.default_grid());
    return b;
}

}  // namespace

TEST_CASE("drifted Brownian basis matches the exponential closed form") {
    const auto& b = bm().basis;
    for (double x : {-1.0, 0.0, 0.5, 1.7, 3.0}) {
        CHECK(b.psi_at(x) == doctest::Approx(std::exp(oracle::kCaseBGammaPlus * x)).epsilon(1e-8));
        CHECK(b.phi_at(x) == doctest::Approx(std::exp(oracle::kCaseBGammaMinus * x)).epsilon(1e-8));
        CHECK(b.hat_psi_at(x) ==
              doctest::Approx(oracle::kCaseBGammaPlus * std::exp(oracle::kCaseBGammaPlus * x)).epsilon(1e-8));
    }
}

TEST_CASE("Wronskians are constant and the hat pair solves the companion equation") {
    for (const FundamentalBasis* b : {&bm().basis, &ou_generic()}) {
        const auto& d = b->diagnostics();
        CHECK(d.wronskian_rel_std < 1e-8);
        CHECK(d.hat_wronskian_rel_std < 1e-8);
        CHECK(d.ode_residual_max < 1e-8);
        CHECK(d.hat_ode_residual_max < 1e-8);
        CHECK(d.lemma_a1_max < 1e-8);
        CHECK(d.monotone());
    }
    // For BM with psi(0) = phi(0) = 1, W = (psi' phi - phi' psi)/S' = gamma+ - gamma-.
    CHECK(bm().basis.W() == doctest::Approx(oracle::kCaseBGammaPlus - oracle::kCaseBGammaMinus).epsilon(1e-10));
}

TEST_CASE("generic shooting agrees with the cylinder closed form on the OU model") {
    const OUParams p;
    const auto grid = p.default_grid();
    const auto cyl = ou_hat_basis(p, grid);
    const auto& gen = ou_generic();
    for (double x : {0.0, 0.3, 0.9, 1.8, 3.0}) {
        CHECK(gen.hat_psi_at(x) / gen.hat_psi_at(0) ==
              doctest::Approx(cyl.hat_psi_at(x) / cyl.hat_psi_at(0)).epsilon(1e-6));
        CHECK(gen.hat_phi_at(x) / gen.hat_phi_at(0) ==
              doctest::Approx(cyl.hat_phi_at(x) / cyl.hat_phi_at(0)).epsilon(1e-6));
    }
}

TEST_CASE("rescaling the basis leaves b* and the value unchanged") {
    const OUParams p;
    const auto& base = ou_generic();
    const auto scaled = base.rescaled(2.0, 3.0);
    const auto reward = p.reward();
    const auto label = classify(base.spec(), reward, base.grid());
    const double b1 = solve_boundary(base, reward, label);
    const double b2 = solve_boundary(scaled, reward, label);
    CHECK(std::abs(b1 - b2) / b1 < 1e-9);
    CHECK(scaled.W() == doctest::Approx(6.0 * base.W()).epsilon(1e-12));
    const auto v1 = build_value(base, reward, label);
    const auto v2 = build_value(scaled, reward, label);
    CHECK(v1.value(0.4) == doctest::Approx(v2.value(0.4)).epsilon(1e-9));
}

TEST_CASE("hitting Laplace transform meets its boundary conditions and bounds") {
    const auto& b = bm().basis;
    for (double n : {0.3, 1.2, 2.5}) {
        const auto c = hitting_coefficients(b, n);
        CHECK(c.A > 0.0);
        CHECK(c.B > 0.0);
        CHECK(c.A <= 1.0 / b.psi_at(n));
        CHECK(c.B <= b.psi_p_at(0.0) / std::abs(b.phi_p_at(0.0)) / b.psi_at(n));
        CHECK(hitting_laplace(b, n, n) == doctest::Approx(1.0).epsilon(1e-14));
        const double fp0 = c.A * b.psi_p_at(0.0) + c.B * b.phi_p_at(0.0);
        CHECK(std::abs(fp0) < 1e-12);
    }
    CHECK(hitting_laplace(b, 0.3, 1.2) == doctest::Approx(oracle::kHittingBM).epsilon(1e-8));
}

TEST_CASE("finite-difference helper is exact on quartics") {
    std::vector<double> x, f;
    for (int i = 0; i <= 20; ++i) {
        const double xi = -1.0 + 0.1 * i + 0.01 * std::sin(i);
        x.push_back(xi);
        f.push_back(xi * xi * xi * xi - xi);
    }
    const auto d = first_derivative_fd(x, f);
    for (std::size_t i = 0; i < x.size(); ++i)
        CHECK(d[i] == doctest::Approx(4 * x[i] * x[i] * x[i] - 1).epsilon(1e-9));
}
