#pragma once

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "refctl/config.hpp"

namespace refctl {

/// Process exit codes shared by every subcommand.
enum ExitCode : int { kExitOk = 0, kExitInput = 2, kExitNumerical = 3 };

/// Everything the solve pipeline produces for one configuration.
struct SolvedProblem {
    DiffusionSpec spec;
    std::shared_ptr<const FundamentalBasis> basis;
    RewardSpec reward;
    CaseLabel label;
    std::shared_ptr<const ControlSolution> solution;
};

SolvedProblem solve_problem(const ProblemConfig& cfg);

/// Writes solution.json and value_function.csv under cfg.output.dir.
/// Exit 0 iff the HJB verification passes.
int cmd_solve(const ProblemConfig& cfg, std::ostream& out, std::ostream& err);

/// Writes simulation.json (and optional path CSVs). policy_b defaults to b*.
int cmd_simulate(const ProblemConfig& cfg, std::optional<double> policy_b, std::ostream& out, std::ostream& err);

/// Writes sweep.csv and sweep.json for an OU problem with constant eta.
int cmd_sweep(const ProblemConfig& cfg, const std::string& parameter, const std::vector<double>& values,
              std::ostream& out, std::ostream& err);

/// Parses "a,b,c" into numbers; throws InputError on a malformed entry.
std::vector<double> parse_value_list(const std::string& text);

/// Command-line entry point: refctl solve|simulate|sweep [flags].
int run_cli(int argc, char** argv);

}  // namespace refctl
