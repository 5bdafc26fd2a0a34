#pragma once

#include <string>
#include <vector>

#include "refctl/diffusion.hpp"
#include "refctl/expression.hpp"

namespace refctl {

class FundamentalBasis;

/// Marginal reward eta for pushing the state down, reflection cost kappa at
/// zero, discount rate r.
struct RewardSpec {
    SmoothFunction eta;
    double kappa = 0.0;
    double r = 0.0;

    /// Validates r > 0 and kappa >= eta(0); throws ModelError otherwise.
    static RewardSpec make(SmoothFunction eta, double kappa, double r);

    double eta0() const { return eta(0.0); }
    RewardSpec with_kappa(double k) const;
};

enum class CaseKind { A, B, C, Indeterminate };

struct CaseLabel {
    CaseKind kind = CaseKind::Indeterminate;
    double x_bar = 0.0;             // only for CaseKind::B
    std::string report;             // explanation for Indeterminate
    std::vector<double> offending;  // sample points behind an Indeterminate label

    std::string name() const;
};

/// G(x) = sigma^2/2 eta'' + (mu + sigma sigma') eta' - (r - mu') eta.
double case_quantity(const DiffusionSpec& spec, const RewardSpec& reward, double x);

/// Sign pattern of G on the nonnegative grid nodes.
CaseLabel classify(const DiffusionSpec& spec, const RewardSpec& reward, const Grid& grid);

/// Turns a running reward pi and proportional control cost alpha into
/// (eta, kappa) = (Pi' - alpha, Pi'(0)) where Pi solves (L_X - r) Pi = pi via
///   Pi(x) = -(2/W) [ phi(x) int_0^x psi pi / (sigma^2 S') + psi(x) int_x^{x_hi} phi pi / (sigma^2 S') ].
/// The returned eta is defined on [x_lo, x_hi] of the basis grid.
RewardSpec from_running_reward(const FundamentalBasis& basis, const SmoothFunction& pi, double alpha);
RewardSpec from_running_reward(const DiffusionSpec& spec, const SmoothFunction& pi, double alpha, double r,
                               const Grid& grid);

/// Numerical proxies for the growth and integrability conditions on eta.
struct RewardChecks {
    double eta_over_hat_psi_at_x_hi = 0.0;  // should be small
    double integrability_proxy = 0.0;       // int_0^{x_hi} m^' |G|
    bool finite = false;
};

RewardChecks check_reward(const FundamentalBasis& basis, const RewardSpec& reward);

}  // namespace refctl
