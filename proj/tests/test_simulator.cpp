#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

#include "refctl/errors.hpp"
#include "refctl/ou.hpp"
#include "refctl/simulator.hpp"

using namespace refctl;

namespace {

SimConfig small_config(std::size_t paths, double horizon) {
    SimConfig cfg;
    cfg.n_paths = paths;
    cfg.horizon_T = horizon;
    cfg.threads = 2;
    return cfg;
}

}  // namespace

TEST_CASE("projected paths stay in the band and push one side at a time") {
    const OUParams p;
    const auto spec = p.diffusion();
    const auto reward = p.reward();
    const double b = 0.9;
    const auto cfg = small_config(1, 20.0);
    for (std::uint64_t path = 0; path < 20; ++path) {
        PathRequest req;
        req.path = path;
        req.negate = (path % 2) == 1;
        req.trace_cap = 100000;
        const auto rec = simulate_double_reflection(spec, reward, b, 0.4, cfg, req);
        CHECK_FALSE(rec.left_band);
        CHECK_FALSE(rec.both_pushed);
        CHECK_FALSE(rec.upper_push_below_barrier);
        CHECK(rec.discounted_D > 0.0);
        CHECK(rec.discounted_L > 0.0);
        CHECK(rec.payoff == doctest::Approx(p.eta0 * rec.discounted_D - p.kappa * rec.discounted_L));
        REQUIRE(rec.X.size() == rec.t.size());
        for (std::size_t i = 0; i < rec.X.size(); ++i) {
            CHECK(rec.X[i] >= 0.0);
            CHECK(rec.X[i] <= b);
        }
        for (std::size_t i = 1; i < rec.L.size(); ++i) {
            CHECK(rec.L[i] >= rec.L[i - 1]);
            CHECK(rec.D[i] >= rec.D[i - 1]);
        }
    }
}

TEST_CASE("a start above the band jumps to it first") {
    const OUParams p;
    const auto rec = simulate_double_reflection(p.diffusion(), p.reward(), 0.8, 1.6, small_config(1, 1.0));
    CHECK(rec.initial_jump == doctest::Approx(0.8));
    CHECK(rec.initial_jump_payoff == doctest::Approx(p.eta0 * 0.8));
}

TEST_CASE("near-deterministic drift pushes at rate mu") {
    // With sigma ~ 0 and x = b the control pays eta0 mu int_0^T e^{-rt} dt.
    const double mu = 1.0, r = 0.5, eta0 = 0.5, T = 5.0;
    const auto spec = DiffusionSpec::brownian(mu, 1e-9);
    const auto reward = RewardSpec::make(SmoothFunction::constant(eta0), 1.0, r);
    auto cfg = small_config(64, T);
    const auto est = estimate_payoff(spec, reward, 1.0, 1.0, cfg);
    const double exact = eta0 * mu / r * (1.0 - std::exp(-r * T));
    CHECK(est.mean == doctest::Approx(exact).epsilon(1e-5));
    CHECK(est.std_error < 1e-6);
    CHECK(est.mean_discounted_L == 0.0);
}

TEST_CASE("estimates do not depend on the number of threads") {
    const OUParams p;
    auto cfg = small_config(512, 10.0);
    cfg.threads = 1;
    const auto a = estimate_payoff(p.diffusion(), p.reward(), 0.9, 0.3, cfg);
    cfg.threads = 5;
    const auto b = estimate_payoff(p.diffusion(), p.reward(), 0.9, 0.3, cfg);
    CHECK(a.mean == b.mean);
    CHECK(a.std_error == b.std_error);
    CHECK(a.mean_discounted_L == b.mean_discounted_L);
}

TEST_CASE("batched queries equal single-query estimates") {
    const OUParams p;
    const auto cfg = small_config(256, 10.0);
    const auto batch = estimate_payoff_batch(p.diffusion(), p.reward(), {{0.9, 0.0}, {0.5, 1.2}, {0.9, 0.45}}, cfg);
    REQUIRE(batch.size() == 3);
    const auto single = estimate_payoff(p.diffusion(), p.reward(), 0.5, 1.2, cfg);
    CHECK(batch[1].mean == single.mean);
    CHECK(batch[1].std_error == single.std_error);
}

TEST_CASE("higher reflection cost lowers the payoff path by path") {
    const OUParams p;
    const auto cfg = small_config(256, 10.0);
    const auto spec = p.diffusion();
    const auto cheap = estimate_payoff(spec, p.reward().with_kappa(1.0), 0.9, 0.2, cfg);
    const auto dear = estimate_payoff(spec, p.reward().with_kappa(2.0), 0.9, 0.2, cfg);
    CHECK(dear.mean < cheap.mean);
    // Without extrapolation the gap is exactly the discounted reflection at 0.
    auto plain = cfg;
    plain.richardson = false;
    const auto a = estimate_payoff(spec, p.reward().with_kappa(1.0), 0.9, 0.2, plain);
    const auto b = estimate_payoff(spec, p.reward().with_kappa(2.0), 0.9, 0.2, plain);
    CHECK(a.mean - b.mean == doctest::Approx(a.mean_discounted_L).epsilon(1e-12));
}

TEST_CASE("reflection-only value is nonpositive and close to the analytic one") {
    // BM mu = 0, sigma^2 = 2, r = 1, kappa = 1: value -exp(-x).
    const auto spec = DiffusionSpec::brownian(0.0, std::sqrt(2.0));
    const auto reward = RewardSpec::make(SmoothFunction::parse("exp(-2*x)"), 1.0, 1.0);
    SimConfig cfg;
    cfg.n_paths = 20000;
    for (double x : {0.0, 1.0}) {
        const auto est = estimate_case_c_value(spec, reward, x, cfg);
        CHECK(est.mean <= 0.0);
        CHECK(std::abs(est.mean + std::exp(-x)) < 4.0 * est.std_error);
        CHECK(est.tail_bound < 1e-3);
    }
}

TEST_CASE("stopping estimator is exact at the endpoints") {
    const OUParams p;
    const double b = solve_ou_boundary(p);
    const auto cfg = small_config(128, 0.0);
    const auto at0 = estimate_vprime_stopping(p.diffusion(), p.reward(), b, 0.0, cfg);
    const auto atb = estimate_vprime_stopping(p.diffusion(), p.reward(), b, b, cfg);
    CHECK(at0.mean == p.kappa);
    CHECK(at0.std_error == 0.0);
    CHECK(atb.mean == p.eta0);
    CHECK(atb.std_error == 0.0);
    CHECK_THROWS_AS(estimate_vprime_stopping(p.diffusion(), p.reward(), b, 2 * b, cfg), InputError);
}

TEST_CASE("hitting-time transform estimate is consistent with the closed form") {
    const auto spec = DiffusionSpec::brownian(1.0, 1.0);
    SimConfig cfg;
    cfg.n_paths = 20000;
    const auto est = estimate_hitting_laplace(spec, 0.5, 0.3, 1.2, cfg);
    // E[e^{-r sigma_n}] from the mpmath reference
    CHECK(std::abs(est.mean - 0.73516065299285568703) < 4.0 * est.std_error);
    CHECK(estimate_hitting_laplace(spec, 0.5, 1.2, 1.2, cfg).mean == 1.0);
}

TEST_CASE("automatic horizon makes the tail negligible") {
    const OUParams p;
    SimConfig cfg;
    const double T = resolved_horizon(p.diffusion(), p.reward(), 0.9, cfg);
    CHECK(T > 100.0);
    CHECK(T < 400.0);
    cfg.horizon_T = 7.0;
    CHECK(resolved_horizon(p.diffusion(), p.reward(), 0.9, cfg) == 7.0);
}

TEST_CASE("invalid simulation settings are input errors") {
    const OUParams p;
    SimConfig cfg = small_config(16, 1.0);
    cfg.dt = 0.0;
    CHECK_THROWS_AS(estimate_payoff(p.diffusion(), p.reward(), 0.9, 0.0, cfg), InputError);
    cfg = small_config(0, 1.0);
    CHECK_THROWS_AS(estimate_payoff(p.diffusion(), p.reward(), 0.9, 0.0, cfg), InputError);
    CHECK_THROWS_AS(estimate_payoff(p.diffusion(), p.reward(), -1.0, 0.0, small_config(16, 1.0)), InputError);
}

TEST_CASE("path dump has the documented columns") {
    const OUParams p;
    PathRequest req;
    req.trace_cap = 50;
    req.trace_every = 10;
    const auto rec = simulate_double_reflection(p.diffusion(), p.reward(), 0.9, 0.2, small_config(1, 1.0), req);
    CHECK(rec.t.size() <= 50);
    const std::string file = "refctl_test_path.csv";
    write_path_csv(rec, file);
    std::ifstream in(file);
    std::string header;
    std::getline(in, header);
    CHECK(header == "t,X,L,D");
    std::remove(file.c_str());
}
