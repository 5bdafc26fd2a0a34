#include <doctest.h>

#include <cmath>

#include "oracle_values.hpp"
#include "refctl/errors.hpp"
#include "refctl/fundamental.hpp"
#include "refctl/ou.hpp"
#include "refctl/reward.hpp"

using namespace refctl;

namespace {

Grid domain_grid(const DiffusionSpec& spec, double r, std::size_t cells = 2000) {
    auto [lo, hi] = default_domain(spec, r);
    return Grid::uniform(lo, hi, cells);
}

}  // namespace

TEST_CASE("reward construction rejects kappa below eta(0) and nonpositive r") {
    CHECK_THROWS_AS(RewardSpec::make(SmoothFunction::constant(0.5), 0.4, 0.05), ModelError);
    CHECK_THROWS_AS(RewardSpec::make(SmoothFunction::constant(0.5), 1.0, 0.0), ModelError);
    CHECK_NOTHROW(RewardSpec::make(SmoothFunction::constant(0.5), 0.5, 0.05));
}

TEST_CASE("constant reward on the OU model is Case A") {
    const OUParams p;
    const auto spec = p.diffusion();
    const auto label = classify(spec, p.reward(), p.default_grid(400));
    CHECK(label.kind == CaseKind::A);
    // G = -(r + theta) eta0
    CHECK(case_quantity(spec, p.reward(), 0.7) == doctest::Approx(-(p.r + p.theta) * p.eta0));
}

TEST_CASE("linear reward on drifted Brownian motion is Case B with x_bar = 2") {
    const auto spec = DiffusionSpec::brownian(1.0, 1.0);
    const auto reward = RewardSpec::make(SmoothFunction::affine(0.0, 1.0), 0.5, 0.5);
    const auto label = classify(spec, reward, domain_grid(spec, 0.5));
    REQUIRE(label.kind == CaseKind::B);
    CHECK(label.x_bar == doctest::Approx(oracle::kCaseBXBar).epsilon(1e-10));
    CHECK(label.name() == "B");
}

TEST_CASE("decaying reward under driftless Brownian motion is Case C") {
    const auto spec = DiffusionSpec::brownian(0.0, std::sqrt(2.0));
    const auto reward = RewardSpec::make(SmoothFunction::parse("exp(-2*x)"), 1.0, 1.0);
    // G = (4 - 1) e^{-2x} > 0
    CHECK(case_quantity(spec, reward, 0.5) == doctest::Approx(3.0 * std::exp(-1.0)));
    CHECK(classify(spec, reward, domain_grid(spec, 1.0)).kind == CaseKind::C);
}

TEST_CASE("sign changes in the wrong direction are indeterminate") {
    const auto spec = DiffusionSpec::brownian(1.0, 1.0);
    // eta = -x gives G = 0.5 x - 1: negative then positive.
    const auto reward = RewardSpec::make(SmoothFunction::affine(0.0, -1.0), 0.5, 0.5);
    const auto label = classify(spec, reward, domain_grid(spec, 0.5));
    CHECK(label.kind == CaseKind::Indeterminate);
    CHECK_FALSE(label.report.empty());
}

TEST_CASE("running reward reduces to the oracle marginal reward") {
    const OUParams p;
    const auto spec = p.diffusion();
    const auto basis = compute_basis(spec, p.r, p.default_grid());
    const auto reward = from_running_reward(basis, SmoothFunction::parse("x"), 0.1);
    CHECK(reward.kappa == doctest::Approx(oracle::kRunningKappa).epsilon(1e-7));
    for (std::size_t i = 0; i < 4; ++i)
        CHECK(reward.eta(oracle::kRunningEtaX[i]) == doctest::Approx(oracle::kRunningEta[i]).epsilon(1e-7));
    // G = pi' + (r - mu') alpha for any running reward.
    for (double x : {0.2, 1.0, 2.5})
        CHECK(case_quantity(spec, reward, x) == doctest::Approx(1.0 + (p.r + p.theta) * 0.1).epsilon(1e-5));
    CHECK(classify(spec, reward, basis.grid()).kind == CaseKind::C);
}

TEST_CASE("classification is invariant under positive scaling of the reward") {
    const auto spec = DiffusionSpec::brownian(1.0, 1.0);
    const auto grid = domain_grid(spec, 0.5);
    const auto base = RewardSpec::make(SmoothFunction::affine(0.0, 1.0), 0.5, 0.5);
    const auto scaled = RewardSpec::make(base.eta.scaled(7.0), 3.5, 0.5);
    const auto a = classify(spec, base, grid);
    const auto b = classify(spec, scaled, grid);
    CHECK(a.kind == b.kind);
    CHECK(a.x_bar == doctest::Approx(b.x_bar).epsilon(1e-12));
}

TEST_CASE("reward checks are finite for the OU problem") {
    const OUParams p;
    const auto basis = compute_basis(p.diffusion(), p.r, p.default_grid(1000));
    const auto checks = check_reward(basis, p.reward());
    CHECK(checks.finite);
    CHECK(checks.eta_over_hat_psi_at_x_hi < 1e-3);
}
