#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "refctl/fundamental.hpp"
#include "refctl/reward.hpp"

namespace refctl {

/// Phi(b) = eta(0) - kappa + (1/w) phi^(0) psi^(0) int_0^b m^' h G, with
/// h = phi^/phi^(0) - psi^/psi^(0). The integral is accumulated once over
/// the basis grid.
class BoundaryObjective {
public:
    BoundaryObjective(const FundamentalBasis& basis, const RewardSpec& reward);

    double operator()(double b) const;
    /// Same quantity from the Neumann condition: (1/w)[psi^(0) I_phi^(b) - phi^(0) I_psi^(b)] - kappa,
    /// with I_f = (f eta' - f' eta)/S^'. Agrees with operator() up to quadrature error.
    double direct(double b) const;
    double derivative(double b) const;

    const FundamentalBasis& basis() const { return *basis_; }
    const RewardSpec& reward() const { return reward_; }

private:
    double integrand(double y) const;

    const FundamentalBasis* basis_;
    RewardSpec reward_;
    double hat_psi0_, hat_phi0_, factor_;
    std::vector<double> cumulative_;  // over nonnegative nodes, starting at 0
};

double boundary_objective(const FundamentalBasis& basis, const RewardSpec& reward, double b);

struct BoundarySolve {
    double b_star = 0.0;
    double residual = 0.0;   // Phi(b_star)
    double bracket_lo = 0.0;
    double bracket_hi = 0.0;
    int iterations = 0;
    std::vector<std::string> warnings;
};

/// Unique root of Phi beyond 0 (Case A) or beyond x_bar (Case B).
BoundarySolve solve_boundary_detailed(const FundamentalBasis& basis, const RewardSpec& reward, const CaseLabel& label);
double solve_boundary(const FundamentalBasis& basis, const RewardSpec& reward, const CaseLabel& label);

/// I_f(x) = (f eta' - f' eta)(x) / S^'(x) for f = psi^ (hat_psi = true) or phi^.
double eta_flux(const FundamentalBasis& basis, const RewardSpec& reward, bool hat_psi, double x);

/// alpha = I_phi^(b*)/w, beta = I_psi^(b*)/w, so that v' = alpha psi' + beta phi' on [0, b*].
std::pair<double, double> coefficients(const FundamentalBasis& basis, const RewardSpec& reward, double b_star);

enum class RegimeKind { ReflectAtBand, SqueezeAtZero, NoAction };
std::string regime_name(RegimeKind k);

enum class KappaMode { Auto, Strict, Equal };

/// The candidate value function and the policy it encodes.
class ControlSolution {
public:
    CaseLabel case_label;
    RegimeKind regime = RegimeKind::NoAction;
    double b_star = 0.0;  // ReflectAtBand only
    double alpha = 0.0;
    double beta = 0.0;
    double v_at_bstar = 0.0;
    std::vector<std::string> notes;

    double value(double x) const;
    double d1(double x) const;
    double d2(double x) const;

    const FundamentalBasis& basis() const { return *basis_; }
    const RewardSpec& reward() const { return reward_; }

private:
    friend ControlSolution build_value(const FundamentalBasis&, const RewardSpec&, const CaseLabel&, KappaMode);

    double eta_integral_from(double x0, const std::vector<double>& cum, double x) const;

    std::shared_ptr<const FundamentalBasis> basis_;
    RewardSpec reward_;
    double squeeze_constant_ = 0.0;
    std::vector<double> eta_cum_;  // int_0^{x_i} eta over nonnegative nodes
};

ControlSolution build_value(const FundamentalBasis& basis, const RewardSpec& reward, const CaseLabel& label,
                            KappaMode mode = KappaMode::Auto);

/// b*_delta for kappa = eta(0) + delta, in the order of `deltas`.
std::vector<std::pair<double, double>> epsilon_boundary_sequence(const FundamentalBasis& basis,
                                                                 const RewardSpec& reward,
                                                                 const std::vector<double>& deltas);

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

struct HjbReport {
    std::vector<double> x;
    std::vector<double> pde;       // (L_X - r) v
    std::vector<double> gradient;  // eta - v'
    double tol = 0.0;
    double max_pde_violation = 0.0;       // max (pde)^+
    double max_gradient_violation = 0.0;  // max (gradient)^+
    double max_hjb_residual = 0.0;        // max |max(pde, gradient)|
    double neumann_residual = 0.0;        // |v'(0) - kappa|
    double neumann_tol = 0.0;
    // ReflectAtBand only; relative residuals at b*.
    double smooth_fit_first = 0.0;
    double smooth_fit_second = 0.0;
    double vb_identity = 0.0;
    std::vector<Interval> pde_active;
    std::vector<Interval> gradient_active;
    bool passed = false;
};

HjbReport verify_hjb(const ControlSolution& solution, const Grid& grid);

struct TangencyReport {
    double y_o = 0.0;
    double y_star = 0.0;
    double theta_at_y_o = 0.0;
    double eta_tilde_at_y_star = 0.0;
    double line_slope = 0.0;
    double eta_tilde_slope = 0.0;
    double tangency_residual = 0.0;  // |line_slope - eta_tilde_slope| / (1 + |line_slope|)
    double min_dominance_gap = 0.0;  // min over [y_o, y*] of theta - eta~ (scaled)
    std::size_t convexity_samples = 0;
    std::size_t convexity_mismatches = 0;
    bool passed = false;
};

/// Geometric check in the coordinates y = F^(x) = psi^/phi^: the line through
/// (y_o, kappa/phi^(0)) and (y*, eta~(y*)) touches eta~ = (eta/phi^) o F^^{-1}
/// at y* and dominates it on [y_o, y*]; the sign of eta~'' matches the sign of G.
TangencyReport transformed_scale_check(const ControlSolution& solution);

}  // namespace refctl
