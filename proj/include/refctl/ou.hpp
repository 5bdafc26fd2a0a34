#pragma once

#include <string>
#include <vector>

#include "refctl/diffusion.hpp"
#include "refctl/fundamental.hpp"
#include "refctl/reward.hpp"

namespace refctl {

/// Dividend problem for dX = (mu - theta X) dt + sigma dW with constant
/// marginal reward eta0 and capital-injection cost kappa > eta0.
struct OUParams {
    double mu = 0.1;
    double theta = 1.0;
    double sigma = 0.894427190999915878;  // sigma^2/2 = 0.4
    double r = 0.05;
    double kappa = 1.0;
    double eta0 = 0.5;

    void validate() const;
    DiffusionSpec diffusion() const;
    RewardSpec reward() const;
    /// Uniform grid over the default working domain.
    Grid default_grid(std::size_t cells = 4000) const;
};

/// ln D_alpha(x) for alpha < 0 from the integral representation
///   D_alpha(x) = e^{-x^2/4} / Gamma(-alpha) int_0^inf t^{-alpha-1} e^{-t^2/2 - x t} dt.
double log_cylinder_D(double alpha, double x);
double cylinder_D(double alpha, double x);

/// Basis from the closed forms psi^(x) = e^{q} D_nu(-z), phi^(x) = e^{q} D_nu(z),
/// z = (x - mu/theta) sqrt(2 theta)/sigma, q = z^2/4, nu = -(r + theta)/theta.
FundamentalBasis ou_hat_basis(const OUParams& p, const Grid& grid);

/// b* from the constant-reward boundary equation
///   kappa = eta0 [1 - (r + theta)/w phi^(0) psi^(0) int_0^b m^' h].
double solve_ou_boundary(const OUParams& p);
double solve_ou_boundary(const OUParams& p, const FundamentalBasis& basis);

enum class SweepParameter { Sigma, Theta, Kappa, Eta0 };
SweepParameter parse_sweep_parameter(const std::string& name);
std::string sweep_parameter_name(SweepParameter p);

struct SweepRow {
    double value = 0.0;
    bool ok = false;
    std::string error;
    double b_star = 0.0;
    double v0 = 0.0;
    double v_at_bstar = 0.0;
    std::vector<double> v_grid;  // V at SweepTable::x_grid
};

struct MonotonicityVerdict {
    std::string name;
    bool asserted = true;  // descriptive verdicts never fail a sweep
    bool holds = false;
};

struct SweepTable {
    SweepParameter parameter = SweepParameter::Theta;
    std::vector<double> x_grid;
    std::vector<SweepRow> rows;
    std::vector<MonotonicityVerdict> verdicts;

    bool all_rows_ok() const;
    bool asserted_verdicts_hold() const;
};

struct SweepOptions {
    std::size_t value_points = 101;
    double value_x_max = 0.0;  // 0 picks 2 * max b*
    unsigned threads = 1;
    std::size_t cells = 4000;
};

SweepTable sensitivity_sweep(const OUParams& base, SweepParameter parameter, const std::vector<double>& values,
                             const SweepOptions& opt = {});

}  // namespace refctl
