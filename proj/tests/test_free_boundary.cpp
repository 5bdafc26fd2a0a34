#include <doctest.h>

#include <cmath>

#include "oracle_values.hpp"
#include "refctl/errors.hpp"
#include "refctl/free_boundary.hpp"
#include "refctl/ou.hpp"

using namespace refctl;

namespace {

struct Problem {
    FundamentalBasis basis;
    RewardSpec reward;
    CaseLabel label;
    ControlSolution solution;

    Problem(const DiffusionSpec& spec, RewardSpec rw, const Grid& grid)
        : basis(compute_basis(spec, rw.r, grid)),
          reward(std::move(rw)),
          label(classify(spec, reward, basis.grid())),
          solution(build_value(basis, reward, label)) {}
};

const Problem& ou_problem() {
    static const OUParams p;
    static const Problem pr(p.diffusion(), p.reward(), p.default_grid());
    return pr;
}

const Problem& case_b() {
    static const Problem pr = [] {
        const auto spec = DiffusionSpec::brownian(1.0, 1.0);
        auto [lo, hi] = default_domain(spec, 0.5);
        return Problem(spec, RewardSpec::make(SmoothFunction::affine(0.0, 1.0), 0.5, 0.5),
                       Grid::uniform(lo, hi, 4000));
    }();
    return pr;
}

const Problem& case_c() {
    static const Problem pr = [] {
        const auto spec = DiffusionSpec::brownian(0.0, std::sqrt(2.0));
        auto [lo, hi] = default_domain(spec, 1.0);
        return Problem(spec, RewardSpec::make(SmoothFunction::parse("exp(-2*x)"), 1.0, 1.0),
                       Grid::uniform(lo, hi, 2000));
    }();
    return pr;
}

}  // namespace

TEST_CASE("OU band and value match the high-precision reference") {
    const auto& s = ou_problem().solution;
    REQUIRE(s.regime == RegimeKind::ReflectAtBand);
    CHECK(s.b_star == doctest::Approx(oracle::kOuBStar).epsilon(1e-9));
    CHECK(s.value(0.0) == doctest::Approx(oracle::kOuV0).epsilon(1e-8));
    CHECK(s.value(0.5 * oracle::kOuBStar) == doctest::Approx(oracle::kOuVHalf).epsilon(1e-8));
    CHECK(s.value(oracle::kOuBStar) == doctest::Approx(oracle::kOuVB).epsilon(1e-8));
    CHECK(s.value(2.0 * oracle::kOuBStar) == doctest::Approx(oracle::kOuV2B).epsilon(1e-8));
    CHECK(s.d1(0.5 * oracle::kOuBStar) == doctest::Approx(oracle::kOuVPrimeHalf).epsilon(1e-8));
    CHECK(s.d1(0.0) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("the two forms of the boundary objective agree") {
    const auto& pr = ou_problem();
    BoundaryObjective phi(pr.basis, pr.reward);
    for (double b : {0.2, 0.6, 0.9073, 1.5}) CHECK(phi(b) == doctest::Approx(phi.direct(b)).epsilon(1e-8));
    CHECK(std::abs(phi(pr.solution.b_star)) < 1e-10);
    CHECK(phi(0.0) == doctest::Approx(pr.reward.eta0() - pr.reward.kappa));
    CHECK(phi.derivative(pr.solution.b_star) > 0.0);
    CHECK(phi.derivative(0.5) == doctest::Approx((phi(0.5 + 1e-5) - phi(0.5 - 1e-5)) / 2e-5).epsilon(1e-6));
}

TEST_CASE("Case B band and value match the closed form") {
    const auto& s = case_b().solution;
    REQUIRE(s.regime == RegimeKind::ReflectAtBand);
    CHECK(s.b_star > oracle::kCaseBXBar);
    CHECK(s.b_star == doctest::Approx(oracle::kCaseBBStar).epsilon(1e-9));
    CHECK(s.value(0.0) == doctest::Approx(oracle::kCaseBV0).epsilon(1e-8));
    CHECK(s.value(1.0) == doctest::Approx(oracle::kCaseBV1).epsilon(1e-8));
    CHECK(s.value(oracle::kCaseBBStar) == doctest::Approx(oracle::kCaseBVB).epsilon(1e-8));
    // Above the band v grows like the integral of eta.
    const double b = s.b_star;
    CHECK(s.value(b + 1.0) == doctest::Approx(s.value(b) + b + 0.5).epsilon(1e-10));
}

TEST_CASE("HJB verification passes for Case A and Case B") {
    for (const Problem* pr : {&ou_problem(), &case_b()}) {
        const auto rep = verify_hjb(pr->solution, pr->basis.grid());
        CHECK(rep.passed);
        CHECK(rep.neumann_residual < 1e-8 * pr->reward.kappa);
        CHECK(rep.smooth_fit_first < 1e-6);
        CHECK(rep.smooth_fit_second < 1e-6);
        CHECK(rep.vb_identity < 1e-8);
        CHECK(rep.max_pde_violation <= rep.tol);
        CHECK(rep.max_gradient_violation <= rep.tol);
        CHECK_FALSE(rep.pde_active.empty());
        CHECK_FALSE(rep.gradient_active.empty());
    }
}

TEST_CASE("OU value identity at the band and concavity below it") {
    const OUParams p;
    const auto& s = ou_problem().solution;
    CHECK(s.v_at_bstar == doctest::Approx(p.eta0 / p.r * (p.mu - p.theta * s.b_star)).epsilon(1e-8));
    for (int i = 0; i <= 50; ++i) CHECK(s.d2(s.b_star * i / 50.0) <= 1e-9);
}

TEST_CASE("transformed-scale tangency holds at b*") {
    for (const Problem* pr : {&ou_problem(), &case_b()}) {
        const auto t = transformed_scale_check(pr->solution);
        CHECK(t.passed);
        CHECK(t.tangency_residual < 1e-6);
        CHECK(t.min_dominance_gap >= -1e-10);
        CHECK(t.convexity_mismatches == 0);
    }
}

TEST_CASE("Case C value is the pure reflection cost") {
    const auto& s = case_c().solution;
    REQUIRE(s.regime == RegimeKind::NoAction);
    for (double x : {0.0, 0.5, 1.0, 2.0}) {
        CHECK(s.value(x) == doctest::Approx(-std::exp(-x)).epsilon(1e-8));
        CHECK(s.value(x) <= 0.0);
    }
    CHECK(verify_hjb(s, case_c().basis.grid()).passed);
}

TEST_CASE("maximizing band sequence shrinks to zero when kappa equals eta(0)") {
    OUParams p;
    p.kappa = p.eta0;
    const auto basis = compute_basis(p.diffusion(), p.r, p.default_grid());
    const auto reward = RewardSpec::make(SmoothFunction::constant(p.eta0), p.kappa, p.r);
    const auto seq = epsilon_boundary_sequence(basis, reward, {1e-1, 1e-2, 1e-3, 1e-4});
    REQUIRE(seq.size() == 4);
    for (std::size_t i = 1; i < seq.size(); ++i) CHECK(seq[i].second < seq[i - 1].second);
    CHECK(seq.back().second < 0.05);

    const auto label = classify(basis.spec(), reward, basis.grid());
    const auto squeeze = build_value(basis, reward, label);
    CHECK(squeeze.regime == RegimeKind::SqueezeAtZero);
    // Band values increase to the squeeze value; the gap shrinks like sqrt(delta).
    CHECK(squeeze.value(0.5) == doctest::Approx(p.mu * p.eta0 / p.r + 0.5 * p.eta0));
    double prev_gap = 1e300;
    for (double d : {1e-2, 1e-4, 1e-6, 1e-8}) {
        const double gap = squeeze.value(0.5) - build_value(basis, reward.with_kappa(p.eta0 + d), label).value(0.5);
        CHECK(gap > 0.0);
        CHECK(gap < prev_gap);
        CHECK(gap < 20.0 * std::sqrt(d));
        prev_gap = gap;
    }
    CHECK_THROWS_AS(build_value(basis, reward, label, KappaMode::Strict), ModelError);
}

TEST_CASE("indeterminate classification is refused") {
    const auto spec = DiffusionSpec::brownian(1.0, 1.0);
    auto [lo, hi] = default_domain(spec, 0.5);
    const auto basis = compute_basis(spec, 0.5, Grid::uniform(lo, hi, 500));
    const auto reward = RewardSpec::make(SmoothFunction::affine(0.0, -1.0), 0.5, 0.5);
    CHECK_THROWS_AS(build_value(basis, reward, classify(spec, reward, basis.grid())), ModelError);
}
