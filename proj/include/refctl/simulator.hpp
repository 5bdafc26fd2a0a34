#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "refctl/diffusion.hpp"
#include "refctl/reward.hpp"

namespace refctl {

struct SimConfig {
    double dt = 1e-3;
    /// Simulation horizon. Zero selects the smallest horizon whose tail bound
    /// falls below tail_rel_tol times the payoff scale.
    double horizon_T = 0.0;
    std::size_t n_paths = 100000;
    std::uint64_t rng_seed = 20240601;
    bool antithetic = true;
    /// Shift the reflecting and absorbing levels inward by
    /// 0.5826 * sigma * sqrt(dt) to correct the discrete-monitoring bias.
    bool barrier_correction = true;
    /// Report 2 J(dt) - J(2 dt), the coarse path driven by the same Brownian
    /// increments, which removes the first-order bias in dt.
    bool richardson = true;
    double tail_rel_tol = 1e-4;
    double max_failure_rate = 1e-3;
    /// Worker threads; 0 uses the hardware concurrency.
    unsigned threads = 0;
};

struct SimEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t n_paths = 0;
    double tail_bound = 0.0;
    double horizon_T = 0.0;
    double dt = 0.0;
    std::uint64_t seed = 0;
    std::size_t failed_paths = 0;
    /// Paths still running at the horizon (stopping estimators only).
    std::size_t unfinished_paths = 0;
    /// Empirical integrability diagnostics: sample means of the discounted
    /// control integrals over the whole horizon and over its first half.
    double mean_discounted_D = 0.0;
    double mean_discounted_L = 0.0;
    double mean_discounted_D_half = 0.0;
    double mean_discounted_L_half = 0.0;
};

/// One trajectory of the doubly reflected process.
struct PathRecord {
    double initial_jump = 0.0;         // Delta D_0 = (x - b)^+
    double initial_jump_payoff = 0.0;  // int_b^x eta
    double discounted_D = 0.0;         // int e^{-rt} dD^c
    double discounted_L = 0.0;         // int e^{-rt} dL
    double payoff = 0.0;               // jump payoff + eta(b) discounted_D - kappa discounted_L
    std::size_t steps = 0;
    bool both_pushed = false;          // some step incremented both D and L
    bool left_band = false;            // some post-step state fell outside [0, b]
    bool upper_push_below_barrier = false;  // dD > 0 with pre-step state <= b
    /// Columns t, X, L, D; filled up to trace_cap rows when requested.
    std::vector<double> t, X, L, D;
};

struct PathRequest {
    std::uint64_t path = 0;
    bool negate = false;  // antithetic partner of `path`
    std::size_t trace_cap = 0;
    std::size_t trace_every = 1;
};

/// Simulates SP(0, b; x) for one path with projected Euler steps. The
/// normals are the same ones the batch estimators use for that path.
PathRecord simulate_double_reflection(const DiffusionSpec& spec, const RewardSpec& reward, double b, double x,
                                      const SimConfig& cfg, const PathRequest& req = {});

void write_path_csv(const PathRecord& rec, const std::string& file);

/// A starting point and band for estimate_payoff_batch; b = +infinity
/// gives the process reflected at 0 only.
struct BandQuery {
    double b = 0.0;
    double x = 0.0;
};

/// J_x(D^b) for every query. Queries share paths (common random numbers),
/// and each estimate is identical to the one a single-query call returns.
std::vector<SimEstimate> estimate_payoff_batch(const DiffusionSpec& spec, const RewardSpec& reward,
                                               const std::vector<BandQuery>& queries, const SimConfig& cfg);

SimEstimate estimate_payoff(const DiffusionSpec& spec, const RewardSpec& reward, double b, double x,
                            const SimConfig& cfg);

/// -kappa E_x[int e^{-rt} dL^0] for the process reflected at 0 only.
SimEstimate estimate_case_c_value(const DiffusionSpec& spec, const RewardSpec& reward, double x,
                                  const SimConfig& cfg);

/// E_x[e^{-int_0^tau (r - mu')} (kappa 1{tau_0 < tau*} + eta(b*) 1{tau* < tau_0})]
/// for the companion diffusion started at x in [0, b*].
SimEstimate estimate_vprime_stopping(const DiffusionSpec& spec, const RewardSpec& reward, double b_star,
                                     double x, const SimConfig& cfg);

/// E_x[e^{-r sigma_n}] for the process reflected at 0, sigma_n the first
/// hitting time of n.
SimEstimate estimate_hitting_laplace(const DiffusionSpec& spec, double r, double x, double n,
                                     const SimConfig& cfg);

/// Horizon that cfg resolves to for the band problem at b.
double resolved_horizon(const DiffusionSpec& spec, const RewardSpec& reward, double b, const SimConfig& cfg);

}  // namespace refctl
