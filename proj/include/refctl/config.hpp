#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "refctl/diffusion.hpp"
#include "refctl/free_boundary.hpp"
#include "refctl/ou.hpp"
#include "refctl/reward.hpp"
#include "refctl/simulator.hpp"

namespace refctl {

inline constexpr int kConfigSchemaVersion = 1;

struct DiffusionDecl {
    std::string kind = "ou";  // "ou", "brownian" or "expression"
    double mu = 0.1;
    double theta = 1.0;
    double sigma = 0.894427190999915878;
    std::string drift;       // expression kind only
    std::string volatility;  // expression kind only
};

struct RewardDecl {
    double r = 0.05;
    std::optional<double> kappa;  // required unless a running reward is given
    std::string eta_kind = "constant";  // "constant", "linear", "exp-decay", "expression"
    double eta_value = 0.5;             // constant
    double eta_intercept = 0.0;         // linear
    double eta_slope = 1.0;             // linear
    double eta_scale = 1.0;             // exp-decay: scale * exp(-rate x)
    double eta_rate = 1.0;              // exp-decay
    std::string eta_expression;
    // Running reward pi with proportional cost alpha replaces (eta, kappa).
    std::optional<std::string> running_pi;
    double running_alpha = 0.0;
};

struct GridDecl {
    std::optional<double> lo;
    std::optional<double> hi;
    std::size_t cells = 4000;
};

struct SolverDecl {
    std::string route = "generic";  // "generic" or "cylinder" (OU only)
    KappaMode kappa_mode = KappaMode::Auto;
};

struct SimDecl {
    SimConfig cfg;
    std::vector<double> x = {0.0};
    std::size_t path_dump = 0;      // number of sample paths written as CSV
    std::size_t path_dump_rows = 2000;
};

struct SweepDecl {
    std::string parameter;
    std::vector<double> values;
    std::size_t value_points = 101;
};

struct OutputDecl {
    std::string dir = "out";
    std::size_t value_points = 201;
    double value_x_max = 0.0;  // 0 picks max(2 b*, 1) within the grid
};

struct ProblemConfig {
    int schema_version = kConfigSchemaVersion;
    std::string name;
    DiffusionDecl diffusion;
    RewardDecl reward;
    GridDecl grid;
    SolverDecl solver;
    SimDecl sim;
    SweepDecl sweep;
    OutputDecl output;

    DiffusionSpec build_diffusion() const;
    Grid build_grid() const;
    /// The reward; a running reward needs the basis to build eta.
    RewardSpec build_reward(const FundamentalBasis& basis) const;
    /// OU parameters when the problem is the OU model with constant eta.
    std::optional<OUParams> ou_params() const;
};

/// Parses and validates a configuration document. Every violation raises
/// InputError (or ModelError for kappa < eta(0)) naming the offending field.
ProblemConfig parse_config(const std::string& json_text);
ProblemConfig load_config(const std::string& path);

}  // namespace refctl
