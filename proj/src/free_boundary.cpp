#include "refctl/free_boundary.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <boost/math/tools/toms748_solve.hpp>

#include "refctl/errors.hpp"
#include "refctl/quadrature.hpp"

namespace refctl {

namespace {

double hat_psi0(const FundamentalBasis& b) { return b.psi_p()[b.grid().zero_index()]; }
double hat_phi0(const FundamentalBasis& b) { return -b.phi_p()[b.grid().zero_index()]; }

void require_in_domain(const FundamentalBasis& basis, double x, const char* what) {
    if (!(x >= 0.0)) {
        std::ostringstream os;
        os << what << ": x = " << x << " is negative";
        throw InputError(os.str());
    }
    if (x > basis.grid().x_hi()) {
        std::ostringstream os;
        os << what << ": x = " << x << " exceeds x_hi = " << basis.grid().x_hi() << "; enlarge the grid";
        throw DomainTooSmall(os.str());
    }
}

}  // namespace

BoundaryObjective::BoundaryObjective(const FundamentalBasis& basis, const RewardSpec& reward)
    : basis_(&basis), reward_(reward), hat_psi0_(hat_psi0(basis)), hat_phi0_(hat_phi0(basis)) {
    if (std::abs(reward.r - basis.r()) > 1e-14 * reward.r)
        throw InputError("reward discount rate differs from the one used to build the basis");
    factor_ = hat_phi0_ * hat_psi0_ / basis.w();
    const auto& x = basis.grid().points();
    const std::size_t z = basis.grid().zero_index();
    cumulative_.assign(x.size() - z, 0.0);
    auto f = [this](double y) { return integrand(y); };
    for (std::size_t i = z + 1; i < x.size(); ++i)
        cumulative_[i - z] = cumulative_[i - z - 1] + kronrod15(f, x[i - 1], x[i]);
}

double BoundaryObjective::integrand(double y) const {
    const double h = basis_->hat_phi_at(y) / hat_phi0_ - basis_->hat_psi_at(y) / hat_psi0_;
    return basis_->speed_at(y) * h * case_quantity(basis_->spec(), reward_, y);
}

double BoundaryObjective::operator()(double b) const {
    require_in_domain(*basis_, b, "boundary objective");
    const auto& x = basis_->grid().points();
    const std::size_t z = basis_->grid().zero_index();
    const std::size_t i = std::max(basis_->grid().locate(b), z);
    const double J = cumulative_[i - z] + kronrod15([this](double y) { return integrand(y); }, x[i], b);
    return reward_.eta0() - reward_.kappa + factor_ * J;
}

double BoundaryObjective::direct(double b) const {
    const double a = eta_flux(*basis_, reward_, false, b);
    const double c = eta_flux(*basis_, reward_, true, b);
    return (hat_psi0_ * a - hat_phi0_ * c) / basis_->w() - reward_.kappa;
}

double BoundaryObjective::derivative(double b) const { return factor_ * integrand(b); }

double boundary_objective(const FundamentalBasis& basis, const RewardSpec& reward, double b) {
    return BoundaryObjective(basis, reward)(b);
}

double eta_flux(const FundamentalBasis& basis, const RewardSpec& reward, bool hat_psi, double x) {
    const double f = hat_psi ? basis.hat_psi_at(x) : basis.hat_phi_at(x);
    const double fp = hat_psi ? basis.hat_psi_p_at(x) : basis.hat_phi_p_at(x);
    return (f * reward.eta.d1(x) - fp * reward.eta(x)) / basis.hat_scale_at(x);
}

BoundarySolve solve_boundary_detailed(const FundamentalBasis& basis, const RewardSpec& reward, const CaseLabel& label) {
    if (label.kind != CaseKind::A && label.kind != CaseKind::B)
        throw ModelError("solve_boundary applies to Case A and Case B only (got " + label.name() + ")");
    const BoundaryObjective Phi(basis, reward);
    BoundarySolve out;
    const double x_hi = basis.grid().x_hi();
    const double ftol = 1e-10 * (std::abs(reward.kappa) + 1.0);

    double lo = 0.0;
    if (label.kind == CaseKind::A) {
        if (!(reward.kappa > reward.eta0()))
            throw ModelError("Case A with kappa = eta(0) has no reflecting band; use the squeeze-at-zero regime");
    } else {
        lo = label.x_bar;
        // Phi < 0 on (0, x_bar] in theory; flag numerical evidence to the contrary.
        const auto& x = basis.grid().points();
        for (std::size_t i = basis.grid().zero_index() + 1; i < x.size() && x[i] <= lo; ++i) {
            if (Phi(x[i]) > ftol) {
                std::ostringstream os;
                os << "Phi is positive at x = " << x[i] << " below x_bar = " << lo;
                out.warnings.push_back(os.str());
                break;
            }
        }
    }
    double f_lo = Phi(lo);
    if (!(f_lo < 0.0)) {
        std::ostringstream os;
        os.precision(17);
        os << "Phi(" << lo << ") = " << f_lo << " is not negative; no bracket for b*";
        throw NumericalError(os.str());
    }
    double hi = std::max(1.0, 2.0 * lo);
    double f_hi = -1.0;
    for (;;) {
        if (hi >= x_hi) {
            hi = x_hi;
            f_hi = Phi(hi);
            if (!(f_hi > 0.0)) {
                std::ostringstream os;
                os << "Phi stays negative up to x_hi = " << x_hi << "; enlarge the grid";
                throw DomainTooSmall(os.str());
            }
            break;
        }
        f_hi = Phi(hi);
        if (f_hi > 0.0) break;
        lo = hi;
        f_lo = f_hi;
        hi *= 2.0;
    }
    out.bracket_lo = lo;
    out.bracket_hi = hi;
    boost::uintmax_t iters = 200;
    auto tol = [](double a, double b) { return std::abs(b - a) <= 1e-12 * (1.0 + std::abs(a)); };
    const auto [a, b] = boost::math::tools::toms748_solve([&](double x) { return Phi(x); }, lo, hi, f_lo, f_hi, tol,
                                                          iters);
    out.iterations = static_cast<int>(iters);
    const double fa = Phi(a), fb = Phi(b);
    out.b_star = std::abs(fa) <= std::abs(fb) ? a : b;
    out.residual = std::abs(fa) <= std::abs(fb) ? fa : fb;
    if (!(std::abs(out.residual) <= ftol) || !(b - a <= 1e-10 * (1.0 + out.b_star))) {
        std::ostringstream os;
        os.precision(17);
        os << "boundary root not converged: |Phi(b)| = " << std::abs(out.residual) << ", bracket width " << (b - a);
        throw NumericalError(os.str());
    }
    return out;
}

double solve_boundary(const FundamentalBasis& basis, const RewardSpec& reward, const CaseLabel& label) {
    return solve_boundary_detailed(basis, reward, label).b_star;
}

std::pair<double, double> coefficients(const FundamentalBasis& basis, const RewardSpec& reward, double b_star) {
    const double w = basis.w();
    const double alpha = eta_flux(basis, reward, false, b_star) / w;
    const double beta = eta_flux(basis, reward, true, b_star) / w;
    if (!std::isfinite(alpha) || !std::isfinite(beta)) throw NumericalError("coefficients are not finite");
    return {alpha, beta};
}

std::string regime_name(RegimeKind k) {
    switch (k) {
        case RegimeKind::ReflectAtBand: return "ReflectAtBand";
        case RegimeKind::SqueezeAtZero: return "SqueezeAtZero";
        case RegimeKind::NoAction: return "NoAction";
    }
    return "?";
}

// ---------------------------------------------------------------------------

double ControlSolution::eta_integral_from(double x0, const std::vector<double>& cum, double x) const {
    // int_{x0}^{x} eta using the cumulative table from 0.
    const auto& p = basis_->grid().points();
    const std::size_t z = basis_->grid().zero_index();
    auto E = [&](double y) {
        const std::size_t i = std::max(basis_->grid().locate(y), z);
        return cum[i - z] + kronrod15([this](double t) { return reward_.eta(t); }, p[i], y);
    };
    return E(x) - E(x0);
}

double ControlSolution::value(double x) const {
    require_in_domain(*basis_, x, "value function");
    switch (regime) {
        case RegimeKind::ReflectAtBand:
            if (x <= b_star) return alpha * basis_->psi_at(x) + beta * basis_->phi_at(x);
            return v_at_bstar + eta_integral_from(b_star, eta_cum_, x);
        case RegimeKind::SqueezeAtZero: return squeeze_constant_ + eta_integral_from(0.0, eta_cum_, x);
        case RegimeKind::NoAction:
            return reward_.kappa * basis_->phi_at(x) / basis_->phi_p()[basis_->grid().zero_index()];
    }
    return std::nan("");
}

double ControlSolution::d1(double x) const {
    require_in_domain(*basis_, x, "value function");
    switch (regime) {
        case RegimeKind::ReflectAtBand:
            if (x <= b_star) return alpha * basis_->psi_p_at(x) + beta * basis_->phi_p_at(x);
            return reward_.eta(x);
        case RegimeKind::SqueezeAtZero: return reward_.eta(x);
        case RegimeKind::NoAction:
            return reward_.kappa * basis_->phi_p_at(x) / basis_->phi_p()[basis_->grid().zero_index()];
    }
    return std::nan("");
}

double ControlSolution::d2(double x) const {
    require_in_domain(*basis_, x, "value function");
    switch (regime) {
        case RegimeKind::ReflectAtBand:
            if (x <= b_star) return alpha * basis_->psi_pp_at(x) + beta * basis_->phi_pp_at(x);
            return reward_.eta.d1(x);
        case RegimeKind::SqueezeAtZero: return reward_.eta.d1(x);
        case RegimeKind::NoAction:
            return reward_.kappa * basis_->phi_pp_at(x) / basis_->phi_p()[basis_->grid().zero_index()];
    }
    return std::nan("");
}

ControlSolution build_value(const FundamentalBasis& basis, const RewardSpec& reward, const CaseLabel& label,
                            KappaMode mode) {
    if (label.kind == CaseKind::Indeterminate)
        throw ModelError("case classification is indeterminate (" + label.report +
                         "); the reflecting-band, squeeze and no-action regimes do not apply");
    if (std::abs(reward.r - basis.r()) > 1e-14 * reward.r)
        throw InputError("reward discount rate differs from the one used to build the basis");
    const bool equal_kappa = std::abs(reward.kappa - reward.eta0()) <= 1e-12 * (1.0 + std::abs(reward.kappa));
    if (mode == KappaMode::Equal && !equal_kappa) throw ModelError("kappa mode 'equal' requires kappa = eta(0)");
    if (mode == KappaMode::Strict && equal_kappa) throw ModelError("kappa mode 'strict' requires kappa > eta(0)");

    ControlSolution s;
    s.case_label = label;
    s.basis_ = std::make_shared<const FundamentalBasis>(basis);
    s.reward_ = reward;

    const auto& x = basis.grid().points();
    const std::size_t z = basis.grid().zero_index();
    s.eta_cum_.assign(x.size() - z, 0.0);
    auto eta = [&reward](double t) { return reward.eta(t); };
    for (std::size_t i = z + 1; i < x.size(); ++i)
        s.eta_cum_[i - z] = s.eta_cum_[i - z - 1] + kronrod15(eta, x[i - 1], x[i]);

    const DiffusionSpec& spec = basis.spec();
    if (label.kind == CaseKind::C) {
        s.regime = RegimeKind::NoAction;
        s.b_star = std::numeric_limits<double>::infinity();
        s.notes.emplace_back("no control beyond reflection at 0 is optimal");
        return s;
    }
    if (label.kind == CaseKind::A && equal_kappa) {
        s.regime = RegimeKind::SqueezeAtZero;
        s.b_star = 0.0;
        const double sg = spec.vol(0.0);
        s.squeeze_constant_ = (0.5 * sg * sg * reward.eta.d1(0.0) + spec.drift(0.0) * reward.eta0()) / reward.r;
        s.v_at_bstar = s.squeeze_constant_;
        s.notes.emplace_back("value is the limit of band policies with b*_delta -> 0 as delta -> 0");
        return s;
    }
    const BoundarySolve bs = solve_boundary_detailed(basis, reward, label);
    s.regime = RegimeKind::ReflectAtBand;
    s.b_star = bs.b_star;
    std::tie(s.alpha, s.beta) = coefficients(basis, reward, bs.b_star);
    s.v_at_bstar = s.alpha * basis.psi_at(bs.b_star) + s.beta * basis.phi_at(bs.b_star);
    s.notes = bs.warnings;
    return s;
}

std::vector<std::pair<double, double>> epsilon_boundary_sequence(const FundamentalBasis& basis,
                                                                 const RewardSpec& reward,
                                                                 const std::vector<double>& deltas) {
    const CaseLabel label = classify(basis.spec(), reward, basis.grid());
    if (label.kind != CaseKind::A) throw ModelError("epsilon boundary sequence needs a Case A problem");
    std::vector<std::pair<double, double>> out;
    out.reserve(deltas.size());
    for (double d : deltas) {
        if (!(d > 0.0)) throw InputError("epsilon boundary sequence: deltas must be positive");
        const RewardSpec perturbed = reward.with_kappa(reward.eta0() + d);
        out.emplace_back(d, solve_boundary(basis, perturbed, label));
    }
    return out;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<Interval> intervals_where(const std::vector<double>& x, const std::vector<bool>& flag) {
    std::vector<Interval> out;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!flag[i]) continue;
        if (!out.empty() && i > 0 && flag[i - 1]) out.back().hi = x[i];
        else out.push_back({x[i], x[i]});
    }
    return out;
}

}  // namespace

HjbReport verify_hjb(const ControlSolution& sol, const Grid& grid) {
    const FundamentalBasis& basis = sol.basis();
    const RewardSpec& reward = sol.reward();
    const DiffusionSpec& spec = basis.spec();
    HjbReport rep;
    for (double x : grid.nonnegative_points())
        if (x <= basis.grid().x_hi()) rep.x.push_back(x);
    const std::size_t n = rep.x.size();
    rep.pde.resize(n);
    rep.gradient.resize(n);
    std::vector<double> v(n);
    double vmax = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = rep.x[i];
        v[i] = sol.value(x);
        vmax = std::max(vmax, std::abs(v[i]));
        const double sg = spec.vol(x);
        const double vp = sol.d1(x);
        rep.pde[i] = 0.5 * sg * sg * sol.d2(x) + spec.drift(x) * vp - reward.r * v[i];
        rep.gradient[i] = reward.eta(x) - vp;
    }
    rep.tol = 1e-6 * (1.0 + vmax);
    std::vector<bool> pde_on(n), grad_on(n);
    for (std::size_t i = 0; i < n; ++i) {
        rep.max_pde_violation = std::max(rep.max_pde_violation, rep.pde[i]);
        rep.max_gradient_violation = std::max(rep.max_gradient_violation, rep.gradient[i]);
        rep.max_hjb_residual = std::max(rep.max_hjb_residual, std::abs(std::max(rep.pde[i], rep.gradient[i])));
        pde_on[i] = std::abs(rep.pde[i]) <= rep.tol;
        grad_on[i] = std::abs(rep.gradient[i]) <= rep.tol;
    }
    rep.pde_active = intervals_where(rep.x, pde_on);
    rep.gradient_active = intervals_where(rep.x, grad_on);
    rep.neumann_residual = std::abs(sol.d1(0.0) - reward.kappa);
    rep.neumann_tol = 1e-8 * std::max(std::abs(reward.kappa), 1.0);

    bool ok = rep.max_pde_violation < rep.tol && rep.max_gradient_violation < rep.tol &&
              rep.max_hjb_residual < rep.tol && rep.neumann_residual < rep.neumann_tol;
    if (sol.regime == RegimeKind::ReflectAtBand) {
        const double b = sol.b_star;
        const double e = reward.eta(b), ep = reward.eta.d1(b);
        rep.smooth_fit_first = std::abs(sol.d1(b) - e) / (1.0 + std::abs(e));
        rep.smooth_fit_second = std::abs(sol.d2(b) - ep) / (1.0 + std::abs(ep));
        const double sg = spec.vol(b);
        const double vb = (0.5 * sg * sg * ep + spec.drift(b) * e) / reward.r;
        rep.vb_identity = std::abs(sol.v_at_bstar - vb) / std::max(std::abs(vb), 1e-300);
        ok = ok && rep.smooth_fit_first < 1e-6 && rep.smooth_fit_second < 1e-6 && rep.vb_identity < 1e-8;
    }
    rep.passed = ok;
    return rep;
}

TangencyReport transformed_scale_check(const ControlSolution& sol) {
    if (sol.regime != RegimeKind::ReflectAtBand)
        throw ModelError("transformed-scale check needs the reflecting-band regime");
    const FundamentalBasis& basis = sol.basis();
    const RewardSpec& reward = sol.reward();
    const auto& grid = basis.grid();
    const std::size_t z = grid.zero_index();
    const auto& xs = grid.points();

    // y = F^(x) on the nonnegative nodes.
    std::vector<double> x, y, et;
    for (std::size_t i = z; i < xs.size(); ++i) {
        const double hp = basis.psi_p()[i];
        const double hf = -basis.phi_p()[i];
        x.push_back(xs[i]);
        y.push_back(hp / hf);
        et.push_back(reward.eta(xs[i]) / hf);
    }
    for (std::size_t i = 1; i < y.size(); ++i)
        if (!(y[i] > y[i - 1])) throw NumericalError("F^ = psi^/phi^ is not increasing on the grid; basis corrupted");

    TangencyReport rep;
    const double b = sol.b_star;
    const double hf0 = -basis.phi_p()[z];
    rep.y_o = y.front();
    rep.y_star = basis.hat_psi_at(b) / basis.hat_phi_at(b);
    rep.theta_at_y_o = reward.kappa / hf0;
    rep.eta_tilde_at_y_star = reward.eta(b) / basis.hat_phi_at(b);
    rep.line_slope = (rep.eta_tilde_at_y_star - rep.theta_at_y_o) / (rep.y_star - rep.y_o);
    // d eta~/dy = (eta/phi^)'/F^' = I_phi^/w.
    rep.eta_tilde_slope = eta_flux(basis, reward, false, b) / basis.w();
    rep.tangency_residual = std::abs(rep.line_slope - rep.eta_tilde_slope) / (1.0 + std::abs(rep.line_slope));

    double scale = std::abs(rep.theta_at_y_o) + std::abs(rep.eta_tilde_at_y_star);
    rep.min_dominance_gap = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < x.size() && x[i] <= b; ++i) {
        const double line = rep.theta_at_y_o + rep.line_slope * (y[i] - rep.y_o);
        rep.min_dominance_gap = std::min(rep.min_dominance_gap, (line - et[i]) / (1.0 + scale));
    }

    // Sign of eta~'' from a three-point difference in y (stencil of +-m nodes).
    const DiffusionSpec& spec = basis.spec();
    const std::size_t m = 4;
    double gmax = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) gmax = std::max(gmax, std::abs(case_quantity(spec, reward, x[i])));
    const double x_cap = std::max(2.0 * b, 1.0);
    for (std::size_t i = m; i + m < x.size() && x[i] <= x_cap; i += m) {
        const double G = case_quantity(spec, reward, x[i]);
        if (std::abs(G) <= 1e-6 * (1.0 + gmax)) continue;
        const double y0 = y[i - m], y1 = y[i], y2 = y[i + m];
        const double d2 = 2.0 * ((et[i + m] - et[i]) / (y2 - y1) - (et[i] - et[i - m]) / (y1 - y0)) / (y2 - y0);
        ++rep.convexity_samples;
        if ((d2 > 0.0) != (G > 0.0)) ++rep.convexity_mismatches;
    }
    rep.passed = rep.tangency_residual < 1e-6 && rep.min_dominance_gap >= -1e-9 && rep.convexity_mismatches == 0;
    return rep;
}

}  // namespace refctl
