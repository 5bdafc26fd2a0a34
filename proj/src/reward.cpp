#include "refctl/reward.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <sstream>

#include "refctl/errors.hpp"
#include "refctl/fundamental.hpp"
#include "refctl/quadrature.hpp"

namespace refctl {

RewardSpec RewardSpec::make(SmoothFunction eta, double kappa, double r) {
    if (!(r > 0.0) || !std::isfinite(r)) throw ModelError("discount rate r must be positive");
    if (!std::isfinite(kappa)) throw InputError("kappa must be finite");
    const double e0 = eta(0.0);
    if (!std::isfinite(e0)) throw InputError("eta(0) is not finite");
    if (kappa < e0) {
        std::ostringstream os;
        os.precision(17);
        os << "kappa = " << kappa << " is below eta(0) = " << e0
           << "; the value function can be infinite (reflect-and-collect arbitrage)";
        throw ModelError(os.str());
    }
    return RewardSpec{std::move(eta), kappa, r};
}

RewardSpec RewardSpec::with_kappa(double k) const { return make(eta, k, r); }

std::string CaseLabel::name() const {
    switch (kind) {
        case CaseKind::A: return "A";
        case CaseKind::B: return "B";
        case CaseKind::C: return "C";
        case CaseKind::Indeterminate: return "Indeterminate";
    }
    return "?";
}

double case_quantity(const DiffusionSpec& spec, const RewardSpec& reward, double x) {
    const double sg = spec.vol(x);
    const double g = 0.5 * sg * sg * reward.eta.d2(x) + spec.hat_drift(x) * reward.eta.d1(x) -
                     (reward.r - spec.drift_prime(x)) * reward.eta(x);
    if (!std::isfinite(g)) {
        std::ostringstream os;
        os << "case quantity is not finite at x = " << x;
        throw NumericalError(os.str());
    }
    return g;
}

CaseLabel classify(const DiffusionSpec& spec, const RewardSpec& reward, const Grid& grid) {
    const std::vector<double> xs = grid.nonnegative_points();
    std::vector<double> g(xs.size());
    double gmax_abs = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        g[i] = case_quantity(spec, reward, xs[i]);
        gmax_abs = std::max(gmax_abs, std::abs(g[i]));
    }
    const double tol = 1e-9 * (1.0 + gmax_abs);

    std::vector<int> sign(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) sign[i] = g[i] > tol ? 1 : (g[i] < -tol ? -1 : 0);

    CaseLabel out;
    const bool all_negative = std::all_of(sign.begin(), sign.end(), [](int s) { return s < 0; });
    const bool none_negative = std::none_of(sign.begin(), sign.end(), [](int s) { return s < 0; });
    if (all_negative) {
        out.kind = CaseKind::A;
        return out;
    }
    if (none_negative && *std::max_element(g.begin(), g.end()) >= 0.0) {
        out.kind = CaseKind::C;
        return out;
    }

    // Case B: strictly positive near 0, one down-crossing, strictly negative afterwards.
    std::size_t last_pos = 0, first_neg = xs.size();
    std::size_t changes = 0;
    int prev = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (sign[i] == 0) continue;
        if (prev != 0 && sign[i] != prev) ++changes;
        if (sign[i] > 0) last_pos = i;
        if (sign[i] < 0 && first_neg == xs.size()) first_neg = i;
        prev = sign[i];
    }
    const bool starts_positive = sign.size() > 1 && sign[1] > 0 && sign[0] >= 0;
    if (changes == 1 && starts_positive && first_neg > last_pos) {
        double a = xs[last_pos], b = xs[first_neg];
        // Zero-signed nodes between last_pos and first_neg are absorbed by the bisection.
        for (int it = 0; it < 200 && b - a > 1e-15 * (1.0 + b); ++it) {
            const double m = 0.5 * (a + b);
            (case_quantity(spec, reward, m) > 0.0 ? a : b) = m;
        }
        out.kind = CaseKind::B;
        out.x_bar = 0.5 * (a + b);
        return out;
    }

    out.kind = CaseKind::Indeterminate;
    std::ostringstream os;
    os << "sign pattern of G on [0, x_hi] has " << changes
       << " sign change(s) and matches none of: negative everywhere, nonnegative everywhere, a single "
          "down-crossing";
    out.report = os.str();
    prev = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (sign[i] == 0) continue;
        if (prev != 0 && sign[i] != prev) out.offending.push_back(xs[i]);
        prev = sign[i];
    }
    if (out.offending.empty() && !xs.empty()) out.offending.push_back(xs.front());
    return out;
}

// ---------------------------------------------------------------------------

namespace {

struct Resolvent {
    std::shared_ptr<const FundamentalBasis> basis;
    SmoothFunction pi;
    std::vector<double> A;  // int_0^{x_i} psi pi / (sigma^2 S')
    std::vector<double> B;  // int_{x_i}^{x_hi} phi pi / (sigma^2 S')

    double fa(double y) const {
        const double sg = basis->spec().vol(y);
        return basis->psi_at(y) * pi(y) / (sg * sg * basis->scale_at(y));
    }
    double fb(double y) const {
        const double sg = basis->spec().vol(y);
        return basis->phi_at(y) * pi(y) / (sg * sg * basis->scale_at(y));
    }

    void build() {
        const auto& x = basis->grid().points();
        const std::size_t n = x.size();
        const std::size_t z = basis->grid().zero_index();
        A.assign(n, 0.0);
        B.assign(n, 0.0);
        auto ga = [this](double y) { return fa(y); };
        auto gb = [this](double y) { return fb(y); };
        for (std::size_t i = z + 1; i < n; ++i) A[i] = A[i - 1] + kronrod15(ga, x[i - 1], x[i]);
        for (std::size_t i = z; i-- > 0;) A[i] = A[i + 1] - kronrod15(ga, x[i], x[i + 1]);
        for (std::size_t i = n - 1; i-- > 0;) B[i] = B[i + 1] + kronrod15(gb, x[i], x[i + 1]);
    }

    void integrals(double x, double& a, double& b) const {
        const auto& p = basis->grid().points();
        const std::size_t i = basis->grid().locate(x);
        a = A[i] + kronrod15([this](double y) { return fa(y); }, p[i], x);
        b = B[i] - kronrod15([this](double y) { return fb(y); }, p[i], x);
    }

    double Pi(double x) const {
        double a, b;
        integrals(x, a, b);
        return -2.0 / basis->W() * (basis->phi_at(x) * a + basis->psi_at(x) * b);
    }
    double dPi(double x) const {
        double a, b;
        integrals(x, a, b);
        return -2.0 / basis->W() * (basis->phi_p_at(x) * a + basis->psi_p_at(x) * b);
    }
};

}  // namespace

RewardSpec from_running_reward(const FundamentalBasis& basis, const SmoothFunction& pi, double alpha) {
    if (!(alpha > 0.0)) throw InputError("running reward: alpha must be positive");
    auto res = std::make_shared<Resolvent>();
    res->basis = std::make_shared<const FundamentalBasis>(basis);
    res->pi = pi;
    res->build();
    const double r = basis.r();
    const DiffusionSpec& spec = basis.spec();

    auto eta = [res, alpha](double x) { return res->dPi(x) - alpha; };
    // Pi'' from the equation itself: sigma^2/2 Pi'' + mu Pi' - r Pi = pi.
    auto eta_p = [res, r, spec](double x) {
        const double sg = spec.vol(x);
        return 2.0 * (res->pi(x) + r * res->Pi(x) - spec.drift(x) * res->dPi(x)) / (sg * sg);
    };
    auto eta_pp = [res, r, spec](double x) {
        const double sg = spec.vol(x);
        const double sp = spec.vol_prime(x);
        const double P = res->Pi(x);
        const double P1 = res->dPi(x);
        const double rhs = res->pi(x) + r * P - spec.drift(x) * P1;
        const double P2 = 2.0 * rhs / (sg * sg);
        const double drhs = res->pi.d1(x) + (r - spec.drift_prime(x)) * P1 - spec.drift(x) * P2;
        return 2.0 * drhs / (sg * sg) - 4.0 * sp * rhs / (sg * sg * sg);
    };
    SmoothFunction eta_fn = SmoothFunction::from_callables(eta, eta_p, eta_pp, "Pi' - alpha for pi = " + pi.description());
    const double kappa = res->dPi(0.0);
    RewardSpec out = RewardSpec::make(std::move(eta_fn), kappa, r);
    const double gap = out.kappa - out.eta0();
    if (!(std::abs(gap - alpha) <= 1e-9 * (1.0 + alpha)))
        throw ModelError("running reward transform: kappa - eta(0) differs from alpha");
    return out;
}

RewardSpec from_running_reward(const DiffusionSpec& spec, const SmoothFunction& pi, double alpha, double r,
                               const Grid& grid) {
    return from_running_reward(compute_basis(spec, r, grid), pi, alpha);
}

RewardChecks check_reward(const FundamentalBasis& basis, const RewardSpec& reward) {
    RewardChecks c;
    const auto& x = basis.grid().points();
    const std::size_t z = basis.grid().zero_index();
    const double xh = x.back();
    c.eta_over_hat_psi_at_x_hi = std::abs(reward.eta(xh)) / basis.psi_p().back();
    double acc = 0.0;
    auto f = [&](double y) { return basis.speed_at(y) * std::abs(case_quantity(basis.spec(), reward, y)); };
    for (std::size_t i = z + 1; i < x.size(); ++i) acc += kronrod15(f, x[i - 1], x[i]);
    c.integrability_proxy = acc;
    c.finite = std::isfinite(acc) && std::isfinite(c.eta_over_hat_psi_at_x_hi);
    return c;
}

}  // namespace refctl
