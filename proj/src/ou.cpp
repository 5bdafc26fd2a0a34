#include "refctl/ou.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <thread>

#include <boost/math/tools/toms748_solve.hpp>

#include "refctl/errors.hpp"
#include "refctl/free_boundary.hpp"
#include "refctl/quadrature.hpp"

namespace refctl {

void OUParams::validate() const {
    auto bad = [](const std::string& m) { throw InputError("ou parameters: " + m); };
    if (!std::isfinite(mu)) bad("mu must be finite");
    if (!(theta > 0.0) || !std::isfinite(theta)) bad("theta must be positive");
    if (!(sigma > 0.0) || !std::isfinite(sigma)) bad("sigma must be positive");
    if (!(r > 0.0) || !std::isfinite(r)) bad("r must be positive");
    if (!(eta0 > 0.0) || !std::isfinite(eta0)) bad("eta0 must be positive");
    if (!(kappa > eta0) || !std::isfinite(kappa)) bad("kappa must exceed eta0");
}

DiffusionSpec OUParams::diffusion() const { return DiffusionSpec::ornstein_uhlenbeck(mu, theta, sigma); }

RewardSpec OUParams::reward() const { return RewardSpec::make(SmoothFunction::constant(eta0), kappa, r); }

Grid OUParams::default_grid(std::size_t cells) const {
    const auto [lo, hi] = default_domain(diffusion(), r);
    return Grid::uniform(lo, hi, cells);
}

// ---------------------------------------------------------------------------

double log_cylinder_D(double alpha, double x) {
    if (!(alpha < 0.0)) throw InputError("cylinder_D: order must be negative");
    if (!std::isfinite(x)) throw InputError("cylinder_D: argument must be finite");
    const double a = -alpha - 1.0;  // exponent of t, > -1
    auto g = [=](double t) { return a * std::log(t) - 0.5 * t * t - x * t; };

    // [0, c]: expand e^{-x t - t^2/2} = sum c_k t^k and integrate t^{a+k} exactly.
    // Keeping |x| c <= 1/2 avoids cancellation in the alternating series.
    const double c = 0.5 / std::max(1.0, std::abs(x));
    double ck_prev = 0.0, ck = 1.0, cpow = std::pow(c, a + 1.0), series = 0.0;
    for (int k = 0; k < 400; ++k) {
        const double term = ck * cpow / (a + k + 1.0);
        series += term;
        // Odd coefficients vanish at x = 0, so test two consecutive terms.
        const double bound = (std::abs(ck) + std::abs(ck_prev)) * cpow;
        if (k > 4 && bound < 1e-18 * std::abs(series)) break;
        const double next = (-x * ck - ck_prev) / (k + 1.0);
        ck_prev = ck;
        ck = next;
        cpow *= c;
    }

    // [c, inf): adaptive quadrature of exp(g - g_ref), g_ref the maximum of g there.
    double t_peak = c;
    const double disc = x * x + 4.0 * a;
    if (disc >= 0.0) {
        const double ts = 0.5 * (-x + std::sqrt(disc));
        if (ts > c) t_peak = ts;
    }
    const double g_ref = std::max(g(t_peak), g(c));
    double T = t_peak + 1.0;
    while (g(T) > g_ref - 46.0) T = t_peak + 2.0 * (T - t_peak);
    QuadOptions opt;
    opt.abs_tol = 0.0;
    opt.rel_tol = 1e-13;
    double tail = 0.0;
    // Split at the peak so each piece is monotone-ish.
    auto f = [&](double t) { return std::exp(g(t) - g_ref); };
    if (t_peak > c) tail += integrate(f, c, t_peak, opt);
    tail += integrate(f, t_peak, T, opt);

    const double total = series * std::exp(-g_ref) + tail;
    if (!(total > 0.0) || !std::isfinite(total)) {
        std::ostringstream os;
        os << "cylinder_D(" << alpha << ", " << x << "): integral evaluation failed";
        throw NumericalError(os.str());
    }
    return -0.25 * x * x - std::lgamma(-alpha) + g_ref + std::log(total);
}

double cylinder_D(double alpha, double x) { return std::exp(log_cylinder_D(alpha, x)); }

FundamentalBasis ou_hat_basis(const OUParams& p, const Grid& grid) {
    p.validate();
    const double m = p.mu / p.theta;
    const double k = std::sqrt(2.0 * p.theta) / p.sigma;
    const double nu = -(p.r + p.theta) / p.theta;
    const auto& x = grid.points();
    const std::size_t n = x.size();
    std::vector<double> hp(n), hpp(n), hppp(n), fp(n), fpp(n), fppp(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double z = k * (x[i] - m);
        const double q = 0.25 * z * z;
        // psi^ = e^q D_nu(-z); d/dx = -k nu e^q D_{nu-1}(-z); d2/dx2 = k^2 nu (nu-1) e^q D_{nu-2}(-z).
        hp[i] = std::exp(q + log_cylinder_D(nu, -z));
        hpp[i] = -k * nu * std::exp(q + log_cylinder_D(nu - 1.0, -z));
        hppp[i] = k * k * nu * (nu - 1.0) * std::exp(q + log_cylinder_D(nu - 2.0, -z));
        fp[i] = std::exp(q + log_cylinder_D(nu, z));
        fpp[i] = k * nu * std::exp(q + log_cylinder_D(nu - 1.0, z));
        fppp[i] = k * k * nu * (nu - 1.0) * std::exp(q + log_cylinder_D(nu - 2.0, z));
    }
    return basis_from_hat_functions(p.diffusion(), p.r, grid, hp, hpp, hppp, fp, fpp, fppp, "ou-cylinder");
}

double solve_ou_boundary(const OUParams& p) { return solve_ou_boundary(p, ou_hat_basis(p, p.default_grid())); }

double solve_ou_boundary(const OUParams& p, const FundamentalBasis& basis) {
    p.validate();
    const auto& x = basis.grid().points();
    const std::size_t z = basis.grid().zero_index();
    const double hpsi0 = basis.psi_p()[z];
    const double hphi0 = -basis.phi_p()[z];
    const double factor = (p.r + p.theta) * p.eta0 * hphi0 * hpsi0 / basis.w();
    auto integrand = [&](double y) {
        const double h = basis.hat_phi_at(y) / hphi0 - basis.hat_psi_at(y) / hpsi0;
        return basis.speed_at(y) * h;
    };
    std::vector<double> cum(x.size() - z, 0.0);
    for (std::size_t i = z + 1; i < x.size(); ++i) cum[i - z] = cum[i - z - 1] + kronrod15(integrand, x[i - 1], x[i]);
    auto Phi = [&](double b) {
        const std::size_t i = std::max(basis.grid().locate(b), z);
        const double J = cum[i - z] + kronrod15(integrand, x[i], b);
        return p.eta0 - p.kappa - factor * J;
    };
    double lo = 0.0, f_lo = Phi(0.0), hi = 1.0, f_hi = Phi(hi);
    while (!(f_hi > 0.0)) {
        if (hi >= x.back()) throw DomainTooSmall("OU boundary equation has no root below x_hi; enlarge the grid");
        lo = hi;
        f_lo = f_hi;
        hi = std::min(2.0 * hi, x.back());
        f_hi = Phi(hi);
    }
    boost::uintmax_t iters = 200;
    auto tol = [](double u, double v) { return std::abs(v - u) <= 1e-12 * (1.0 + std::abs(u)); };
    const auto [a, b] = boost::math::tools::toms748_solve(Phi, lo, hi, f_lo, f_hi, tol, iters);
    const double root = std::abs(Phi(a)) <= std::abs(Phi(b)) ? a : b;
    if (!(std::abs(Phi(root)) <= 1e-10 * (p.kappa + 1.0))) throw NumericalError("OU boundary root did not converge");
    return root;
}

// ---------------------------------------------------------------------------

SweepParameter parse_sweep_parameter(const std::string& name) {
    if (name == "sigma") return SweepParameter::Sigma;
    if (name == "theta") return SweepParameter::Theta;
    if (name == "kappa") return SweepParameter::Kappa;
    if (name == "eta0") return SweepParameter::Eta0;
    throw InputError("unknown sweep parameter '" + name + "' (expected sigma, theta, kappa or eta0)");
}

std::string sweep_parameter_name(SweepParameter p) {
    switch (p) {
        case SweepParameter::Sigma: return "sigma";
        case SweepParameter::Theta: return "theta";
        case SweepParameter::Kappa: return "kappa";
        case SweepParameter::Eta0: return "eta0";
    }
    return "?";
}

bool SweepTable::all_rows_ok() const {
    return std::all_of(rows.begin(), rows.end(), [](const SweepRow& r) { return r.ok; });
}

bool SweepTable::asserted_verdicts_hold() const {
    return std::all_of(verdicts.begin(), verdicts.end(),
                       [](const MonotonicityVerdict& v) { return !v.asserted || v.holds; });
}

namespace {

OUParams with_value(OUParams p, SweepParameter which, double v) {
    switch (which) {
        case SweepParameter::Sigma: p.sigma = v; break;
        case SweepParameter::Theta: p.theta = v; break;
        case SweepParameter::Kappa: p.kappa = v; break;
        case SweepParameter::Eta0: p.eta0 = v; break;
    }
    return p;
}

// +1: nondecreasing along increasing parameter, -1: nonincreasing.
bool monotone_b(const std::vector<const SweepRow*>& rows, int dir) {
    for (std::size_t i = 1; i < rows.size(); ++i)
        if (dir * (rows[i]->b_star - rows[i - 1]->b_star) < -1e-9 * (1.0 + rows[i]->b_star)) return false;
    return true;
}

bool monotone_v(const std::vector<const SweepRow*>& rows, int dir) {
    for (std::size_t i = 1; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i]->v_grid.size(); ++j) {
            const double a = rows[i - 1]->v_grid[j], b = rows[i]->v_grid[j];
            if (dir * (b - a) < -1e-9 * (1.0 + std::abs(a))) return false;
        }
    return true;
}

}  // namespace

SweepTable sensitivity_sweep(const OUParams& base, SweepParameter parameter, const std::vector<double>& values,
                             const SweepOptions& opt) {
    if (values.empty()) throw InputError("sweep needs at least one parameter value");
    SweepTable table;
    table.parameter = parameter;
    table.rows.resize(values.size());
    std::vector<std::unique_ptr<ControlSolution>> sols(values.size());

    auto work = [&](std::size_t i) {
        SweepRow& row = table.rows[i];
        row.value = values[i];
        try {
            const OUParams p = with_value(base, parameter, values[i]);
            p.validate();
            const FundamentalBasis basis = ou_hat_basis(p, p.default_grid(opt.cells));
            const RewardSpec reward = p.reward();
            const CaseLabel label = classify(basis.spec(), reward, basis.grid());
            sols[i] = std::make_unique<ControlSolution>(build_value(basis, reward, label, KappaMode::Strict));
            row.b_star = sols[i]->b_star;
            row.v0 = sols[i]->value(0.0);
            row.v_at_bstar = sols[i]->v_at_bstar;
            row.ok = true;
        } catch (const std::exception& e) {
            row.ok = false;
            row.error = e.what();
        }
    };
    const unsigned nthreads = std::max(1u, std::min<unsigned>(opt.threads, static_cast<unsigned>(values.size())));
    if (nthreads == 1) {
        for (std::size_t i = 0; i < values.size(); ++i) work(i);
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < nthreads; ++t)
            pool.emplace_back([&, t] {
                for (std::size_t i = t; i < values.size(); i += nthreads) work(i);
            });
        for (auto& th : pool) th.join();
    }

    double bmax = 0.0, xcap = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < values.size(); ++i)
        if (table.rows[i].ok) {
            bmax = std::max(bmax, table.rows[i].b_star);
            xcap = std::min(xcap, sols[i]->basis().grid().x_hi());
        }
    const double x_max = std::min(opt.value_x_max > 0.0 ? opt.value_x_max : 2.0 * bmax, xcap);
    if (x_max > 0.0 && opt.value_points >= 2)
        for (std::size_t j = 0; j < opt.value_points; ++j)
            table.x_grid.push_back(j + 1 == opt.value_points
                                       ? x_max
                                       : x_max * static_cast<double>(j) / static_cast<double>(opt.value_points - 1));
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!table.rows[i].ok) continue;
        for (double x : table.x_grid) table.rows[i].v_grid.push_back(sols[i]->value(x));
    }

    std::vector<const SweepRow*> sorted;
    for (const auto& r : table.rows)
        if (r.ok) sorted.push_back(&r);
    std::sort(sorted.begin(), sorted.end(), [](const SweepRow* a, const SweepRow* b) { return a->value < b->value; });
    auto add = [&](std::string name, bool asserted, bool holds) {
        table.verdicts.push_back({std::move(name), asserted, holds});
    };
    switch (parameter) {
        case SweepParameter::Sigma:
            add("b* nondecreasing in sigma", true, monotone_b(sorted, +1));
            add("V nonincreasing in sigma", true, monotone_v(sorted, -1));
            break;
        case SweepParameter::Theta:
            add("V nonincreasing in theta", true, monotone_v(sorted, -1));
            add("b* nonincreasing in theta (observed trend)", false, monotone_b(sorted, -1));
            break;
        case SweepParameter::Kappa:
            add("b* nondecreasing in kappa", true, monotone_b(sorted, +1));
            add("V nonincreasing in kappa", true, monotone_v(sorted, -1));
            break;
        case SweepParameter::Eta0:
            // With constant eta the boundary equation depends on kappa and eta0
            // only through kappa/eta0, so raising eta0 acts like lowering kappa.
            add("b* nonincreasing in eta0", true, monotone_b(sorted, -1));
            add("V nondecreasing in eta0", true, monotone_v(sorted, +1));
            break;
    }
    return table;
}

}  // namespace refctl
