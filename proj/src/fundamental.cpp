#include "refctl/fundamental.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <boost/numeric/odeint.hpp>

#include "refctl/errors.hpp"

namespace refctl {

namespace {

double hermite(double x0, double x1, double f0, double f1, double d0, double d1, double x) {
    const double h = x1 - x0;
    const double t = (x - x0) / h;
    const double t2 = t * t;
    const double t3 = t2 * t;
    const double h00 = 2 * t3 - 3 * t2 + 1;
    const double h10 = t3 - 2 * t2 + t;
    const double h01 = -2 * t3 + 3 * t2;
    const double h11 = t3 - t2;
    return h00 * f0 + h10 * h * d0 + h01 * f1 + h11 * h * d1;
}

// Hermite interpolation of ln|f| when f keeps one sign on the cell, plain
// Hermite otherwise.
double hermite_signed(double x0, double x1, double f0, double f1, double d0, double d1, double x) {
    if (f0 > 0.0 && f1 > 0.0)
        return std::exp(hermite(x0, x1, std::log(f0), std::log(f1), d0 / f0, d1 / f1, x));
    if (f0 < 0.0 && f1 < 0.0)
        return -std::exp(hermite(x0, x1, std::log(-f0), std::log(-f1), d0 / f0, d1 / f1, x));
    return hermite(x0, x1, f0, f1, d0, d1, x);
}

// Third derivative from differentiating the X equation:
// u''' = -2[(mu + sigma sigma') u'' - (r - mu') u'] / sigma^2.
double third_derivative(const DiffusionSpec& spec, double r, double x, double up, double upp) {
    const double sg = spec.vol(x);
    return -2.0 * (spec.hat_drift(x) * upp - (r - spec.drift_prime(x)) * up) / (sg * sg);
}

double rel_std(const std::vector<double>& v, double& mean_out) {
    const double n = static_cast<double>(v.size());
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
    double ss = 0.0;
    for (double e : v) ss += (e - mean) * (e - mean);
    mean_out = mean;
    return std::sqrt(ss / n) / std::abs(mean);
}

}  // namespace

std::vector<double> first_derivative_fd(const std::vector<double>& x, const std::vector<double>& f) {
    const std::size_t n = x.size();
    std::vector<double> d(n, 0.0);
    if (n < 5) throw InputError("first_derivative_fd needs at least five points");
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t s = i < 2 ? 0 : (i + 2 >= n ? n - 5 : i - 2);
        // Derivative of the Lagrange interpolant through x[s..s+4] at x[i].
        double acc = 0.0;
        for (std::size_t j = s; j < s + 5; ++j) {
            double wj = 0.0;
            // l_j'(x_i) = sum_{k != j} [prod_{m != j,k} (x_i - x_m)] / prod_{m != j} (x_j - x_m)
            double denom = 1.0;
            for (std::size_t m = s; m < s + 5; ++m)
                if (m != j) denom *= x[j] - x[m];
            for (std::size_t k = s; k < s + 5; ++k) {
                if (k == j) continue;
                double prod = 1.0;
                for (std::size_t m = s; m < s + 5; ++m)
                    if (m != j && m != k) prod *= x[i] - x[m];
                wj += prod;
            }
            acc += wj / denom * f[j];
        }
        d[i] = acc;
    }
    return d;
}

FundamentalBasis::FundamentalBasis(DiffusionSpec spec, double r, Grid grid, Arrays arrays, Normalization norm,
                                   std::string source)
    : spec_(std::move(spec)),
      r_(r),
      grid_(std::move(grid)),
      a_(std::move(arrays)),
      norm_(norm),
      source_(std::move(source)) {
    const std::size_t n = grid_.size();
    auto check = [&](const std::vector<double>& v, const char* name) {
        if (v.size() != n) throw InputError(std::string("basis array ") + name + " has the wrong length");
        for (double e : v)
            if (!std::isfinite(e))
                throw NumericalError(std::string("basis array ") + name +
                                     " is not finite on the grid; shrink the working domain");
    };
    check(a_.psi, "psi");
    check(a_.psi_p, "psi'");
    check(a_.psi_pp, "psi''");
    check(a_.psi_ppp, "psi'''");
    check(a_.phi, "phi");
    check(a_.phi_p, "phi'");
    check(a_.phi_pp, "phi''");
    check(a_.phi_ppp, "phi'''");
    check(a_.log_scale, "log S'");
    check(a_.log_hat_scale, "log S^'");
    compute_diagnostics();
}

std::vector<double> FundamentalBasis::hat_phi() const {
    std::vector<double> v(a_.phi_p.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = -a_.phi_p[i];
    return v;
}

std::vector<double> FundamentalBasis::hat_phi_p() const {
    std::vector<double> v(a_.phi_pp.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = -a_.phi_pp[i];
    return v;
}

double FundamentalBasis::eval(Which which, double x) const {
    const std::vector<double>* f = nullptr;
    const std::vector<double>* d = nullptr;
    switch (which) {
        case Which::Psi: f = &a_.psi, d = &a_.psi_p; break;
        case Which::PsiP: f = &a_.psi_p, d = &a_.psi_pp; break;
        case Which::PsiPP: f = &a_.psi_pp, d = &a_.psi_ppp; break;
        case Which::Phi: f = &a_.phi, d = &a_.phi_p; break;
        case Which::PhiP: f = &a_.phi_p, d = &a_.phi_pp; break;
        case Which::PhiPP: f = &a_.phi_pp, d = &a_.phi_ppp; break;
    }
    const std::size_t i = grid_.locate(x);
    const auto& p = grid_.points();
    if (x < p.front() || x > p.back()) {
        std::ostringstream os;
        os << "basis evaluated at x = " << x << " outside [" << p.front() << ", " << p.back() << "]";
        throw DomainTooSmall(os.str());
    }
    return hermite_signed(p[i], p[i + 1], (*f)[i], (*f)[i + 1], (*d)[i], (*d)[i + 1], x);
}

double FundamentalBasis::psi_at(double x) const { return eval(Which::Psi, x); }
double FundamentalBasis::psi_p_at(double x) const { return eval(Which::PsiP, x); }
double FundamentalBasis::psi_pp_at(double x) const { return eval(Which::PsiPP, x); }
double FundamentalBasis::phi_at(double x) const { return eval(Which::Phi, x); }
double FundamentalBasis::phi_p_at(double x) const { return eval(Which::PhiP, x); }
double FundamentalBasis::phi_pp_at(double x) const { return eval(Which::PhiPP, x); }

double FundamentalBasis::scale_at(double x) const {
    const std::size_t i = grid_.locate(x);
    const auto& p = grid_.points();
    auto slope = [&](double y) {
        const double sg = spec_.vol(y);
        return -2.0 * spec_.drift(y) / (sg * sg);
    };
    return std::exp(hermite(p[i], p[i + 1], a_.log_scale[i], a_.log_scale[i + 1], slope(p[i]), slope(p[i + 1]), x));
}

double FundamentalBasis::hat_scale_at(double x) const {
    const std::size_t i = grid_.locate(x);
    const auto& p = grid_.points();
    auto slope = [&](double y) {
        const double sg = spec_.vol(y);
        return -2.0 * spec_.hat_drift(y) / (sg * sg);
    };
    return std::exp(
        hermite(p[i], p[i + 1], a_.log_hat_scale[i], a_.log_hat_scale[i + 1], slope(p[i]), slope(p[i + 1]), x));
}

double FundamentalBasis::speed_at(double x) const {
    const double sg = spec_.vol(x);
    return 2.0 / (sg * sg * hat_scale_at(x));
}

FundamentalBasis FundamentalBasis::rescaled(double c_psi, double c_phi) const {
    if (!(c_psi > 0.0 && c_phi > 0.0)) throw InputError("rescaled: factors must be positive");
    Arrays a = a_;
    for (auto* v : {&a.psi, &a.psi_p, &a.psi_pp, &a.psi_ppp})
        for (double& e : *v) e *= c_psi;
    for (auto* v : {&a.phi, &a.phi_p, &a.phi_pp, &a.phi_ppp})
        for (double& e : *v) e *= c_phi;
    Normalization n = norm_;
    n.psi_value *= c_psi;
    n.phi_value *= c_phi;
    return FundamentalBasis(spec_, r_, grid_, std::move(a), n, source_ + " (rescaled)");
}

void FundamentalBasis::compute_diagnostics() {
    const auto& x = grid_.points();
    const std::size_t n = x.size();
    std::vector<double> Wi(n), wi(n);
    for (std::size_t i = 0; i < n; ++i) {
        Wi[i] = (a_.psi_p[i] * a_.phi[i] - a_.phi_p[i] * a_.psi[i]) * std::exp(-a_.log_scale[i]);
        // psi^ = psi', phi^ = -phi': psi^' phi^ - phi^' psi^ = -psi'' phi' + phi'' psi'
        wi[i] = (a_.phi_pp[i] * a_.psi_p[i] - a_.psi_pp[i] * a_.phi_p[i]) * std::exp(-a_.log_hat_scale[i]);
    }
    diag_.wronskian_rel_std = rel_std(Wi, W_);
    diag_.hat_wronskian_rel_std = rel_std(wi, w_);

    auto strictly = [&](const std::vector<double>& v, int sign) {
        for (std::size_t i = 1; i < n; ++i)
            if (!(sign * (v[i] - v[i - 1]) > 0.0)) return false;
        return true;
    };
    diag_.psi_increasing = strictly(a_.psi, +1);
    diag_.phi_decreasing = strictly(a_.phi, -1);
    diag_.hat_psi_increasing = strictly(a_.psi_p, +1);
    diag_.hat_phi_decreasing = strictly(hat_phi(), -1);

    // Logarithmic derivatives and their finite-difference slopes.
    auto ratio = [&](const std::vector<double>& num, const std::vector<double>& den) {
        std::vector<double> q(n);
        for (std::size_t i = 0; i < n; ++i) q[i] = num[i] / den[i];
        return q;
    };
    auto log_of_abs = [&](const std::vector<double>& v) {
        std::vector<double> q(n);
        for (std::size_t i = 0; i < n; ++i) q[i] = std::log(std::abs(v[i]));
        return q;
    };
    const auto p_psi = ratio(a_.psi_p, a_.psi);
    const auto p_phi = ratio(a_.phi_p, a_.phi);
    const auto q_psi = ratio(a_.psi_pp, a_.psi_p);
    const auto q_phi = ratio(a_.phi_pp, a_.phi_p);
    const auto dp_psi = first_derivative_fd(x, p_psi);
    const auto dp_phi = first_derivative_fd(x, p_phi);
    const auto dq_psi = first_derivative_fd(x, q_psi);
    const auto dq_phi = first_derivative_fd(x, q_phi);
    const auto dl_psi = first_derivative_fd(x, log_of_abs(a_.psi));
    const auto dl_phi = first_derivative_fd(x, log_of_abs(a_.phi));

    double res = 0.0, hat_res = 0.0, a1 = 0.0;
    for (std::size_t i = 2; i + 2 < n; ++i) {
        const double sg = spec_.vol(x[i]);
        const double s2 = 0.5 * sg * sg;
        const double mu = spec_.drift(x[i]);
        const double hmu = spec_.hat_drift(x[i]);
        const double rh = r_ - spec_.drift_prime(x[i]);
        auto x_res = [&](double u, double up, double upp_id, double p, double dp) {
            const double upp = u * (dp + p * p);
            const double scale = std::abs(s2 * upp_id) + std::abs(mu * up) + std::abs(r_ * u);
            return std::abs(s2 * upp + mu * up - r_ * u) / scale;
        };
        auto h_res = [&](double f, double fp, double fpp_id, double q, double dq) {
            const double fpp = f * (dq + q * q);
            const double scale = std::abs(s2 * fpp_id) + std::abs(hmu * fp) + std::abs(rh * f);
            return std::abs(s2 * fpp + hmu * fp - rh * f) / scale;
        };
        res = std::max({res, x_res(a_.psi[i], a_.psi_p[i], a_.psi_pp[i], p_psi[i], dp_psi[i]),
                        x_res(a_.phi[i], a_.phi_p[i], a_.phi_pp[i], p_phi[i], dp_phi[i])});
        hat_res = std::max({hat_res, h_res(a_.psi_p[i], a_.psi_pp[i], a_.psi_ppp[i], q_psi[i], dq_psi[i]),
                            h_res(-a_.phi_p[i], -a_.phi_pp[i], -a_.phi_ppp[i], q_phi[i], dq_phi[i])});
        const double psi_fd = a_.psi[i] * dl_psi[i];
        const double phi_fd = a_.phi[i] * dl_phi[i];
        a1 = std::max({a1, std::abs(psi_fd - a_.psi_p[i]) / (1.0 + std::abs(a_.psi_p[i])),
                       std::abs(-phi_fd - (-a_.phi_p[i])) / (1.0 + std::abs(a_.phi_p[i]))});
    }
    diag_.ode_residual_max = res;
    diag_.hat_ode_residual_max = hat_res;
    diag_.lemma_a1_max = a1;
    diag_.psi_at_x_hi = a_.psi.back();
    diag_.phi_flux_at_x_hi = a_.phi_p.back() * std::exp(-a_.log_scale.back());
}

// ---------------------------------------------------------------------------

namespace {

using State = std::array<double, 2>;

struct Riccati {
    const DiffusionSpec* spec;
    double r;
    void operator()(const State& s, State& ds, double x) const {
        const double sg = spec->vol(x);
        ds[0] = s[1];
        ds[1] = 2.0 * (r - spec->drift(x) * s[1]) / (sg * sg) - s[1] * s[1];
    }
};

// Roots of sigma^2/2 g^2 + mu g - r = 0 with coefficients frozen at x.
std::pair<double, double> frozen_roots(const DiffusionSpec& spec, double r, double x) {
    const double s2 = spec.vol(x) * spec.vol(x);
    const double mu = spec.drift(x);
    const double disc = std::sqrt(mu * mu + 2.0 * r * s2);
    // Cancellation-free forms.
    const double plus = mu >= 0.0 ? 2.0 * r / (mu + disc) : (-mu + disc) / s2;
    const double minus = mu <= 0.0 ? -2.0 * r / (-mu + disc) : (-mu - disc) / s2;
    return {plus, minus};
}

// Integrates (y, p) through the grid nodes in the given order, starting at
// `start` (beyond the first node) so that the relaxation of the frozen-
// coefficient slope p0 towards the true logarithmic derivative happens off
// the grid. Returns y and p per node.
void shoot(const DiffusionSpec& spec, double r, double start, const std::vector<double>& nodes, double p0,
           const BasisOptions& opt, std::vector<double>& y, std::vector<double>& p, const char* direction) {
    namespace odeint = boost::numeric::odeint;
    using Stepper = odeint::runge_kutta_fehlberg78<State>;
    State s{0.0, p0};
    std::vector<double> xs;
    xs.reserve(nodes.size() + 1);
    xs.push_back(start);
    xs.insert(xs.end(), nodes.begin(), nodes.end());
    y.assign(nodes.size(), 0.0);
    p.assign(nodes.size(), 0.0);
    std::size_t k = 0;
    auto observer = [&](const State& st, double) {
        if (k > 0) {
            y[k - 1] = st[0];
            p[k - 1] = st[1];
        }
        ++k;
    };
    const double dt0 = (nodes[1] - nodes[0]) * 0.5;
    try {
        odeint::integrate_times(odeint::make_controlled(opt.abs_tol, opt.rel_tol, Stepper()), Riccati{&spec, r}, s,
                                xs.begin(), xs.end(), dt0, observer);
    } catch (const std::exception& e) {
        throw NumericalError(std::string("shooting ") + direction + " failed: " + e.what());
    }
    for (std::size_t i = 0; i < nodes.size(); ++i)
        if (!std::isfinite(y[i]) || !std::isfinite(p[i]))
            throw NumericalError(std::string("shooting ") + direction + " produced a non-finite value");
}

}  // namespace

FundamentalBasis compute_basis(const DiffusionSpec& spec, double r, const Grid& grid, const BasisOptions& opt) {
    if (!(r > 0.0)) throw InputError("compute_basis: r must be positive");
    const ValidationReport rep = validate_assumptions(spec, r, grid);
    if (!rep.passed()) {
        std::string msg = "compute_basis: standing assumptions fail:";
        for (const auto& m : rep.messages) msg += " " + m + ";";
        throw ModelError(msg);
    }
    const auto& x = grid.points();
    const std::size_t n = x.size();
    const std::size_t z = grid.zero_index();

    const double pad = opt.shooting_pad * (x.back() - x.front());
    const double lo_start = x.front() - pad;
    const double hi_start = x.back() + pad;

    std::vector<double> y_psi, p_psi;
    shoot(spec, r, lo_start, x, frozen_roots(spec, r, lo_start).first, opt, y_psi, p_psi, "forward from x_lo (psi)");

    std::vector<double> xr(x.rbegin(), x.rend());
    std::vector<double> y_phi_r, p_phi_r;
    shoot(spec, r, hi_start, xr, frozen_roots(spec, r, hi_start).second, opt, y_phi_r, p_phi_r,
          "backward from x_hi (phi)");
    std::vector<double> y_phi(y_phi_r.rbegin(), y_phi_r.rend());
    std::vector<double> p_phi(p_phi_r.rbegin(), p_phi_r.rend());

    FundamentalBasis::Arrays a;
    for (auto* v : {&a.psi, &a.psi_p, &a.psi_pp, &a.psi_ppp, &a.phi, &a.phi_p, &a.phi_pp, &a.phi_ppp}) v->resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double sg = spec.vol(x[i]);
        const double s2 = sg * sg;
        const double mu = spec.drift(x[i]);
        const double ly = y_psi[i] - y_psi[z];
        const double lp = y_phi[i] - y_phi[z];
        if (std::abs(ly) > 700.0)
            throw NumericalError("psi (forward from x_lo) leaves the double range; shrink the working domain");
        if (std::abs(lp) > 700.0)
            throw NumericalError("phi (backward from x_hi) leaves the double range; shrink the working domain");
        a.psi[i] = std::exp(ly);
        a.psi_p[i] = p_psi[i] * a.psi[i];
        a.psi_pp[i] = 2.0 * (r * a.psi[i] - mu * a.psi_p[i]) / s2;
        a.psi_ppp[i] = third_derivative(spec, r, x[i], a.psi_p[i], a.psi_pp[i]);
        a.phi[i] = std::exp(lp);
        a.phi_p[i] = p_phi[i] * a.phi[i];
        a.phi_pp[i] = 2.0 * (r * a.phi[i] - mu * a.phi_p[i]) / s2;
        a.phi_ppp[i] = third_derivative(spec, r, x[i], a.phi_p[i], a.phi_pp[i]);
    }
    a.log_scale = log_scale_on_grid(spec, grid, false);
    a.log_hat_scale = log_scale_on_grid(spec, grid, true);
    return FundamentalBasis(spec, r, grid, std::move(a), Normalization{0.0, 1.0, 1.0}, "ode-shooting");
}

FundamentalBasis basis_from_hat_functions(const DiffusionSpec& spec, double r, const Grid& grid,
                                          const std::vector<double>& hat_psi, const std::vector<double>& hat_psi_p,
                                          const std::vector<double>& hat_psi_pp, const std::vector<double>& hat_phi,
                                          const std::vector<double>& hat_phi_p, const std::vector<double>& hat_phi_pp,
                                          std::string source) {
    const auto& x = grid.points();
    const std::size_t n = x.size();
    const std::size_t z = grid.zero_index();
    FundamentalBasis::Arrays a;
    for (auto* v : {&a.psi, &a.psi_p, &a.psi_pp, &a.psi_ppp, &a.phi, &a.phi_p, &a.phi_pp, &a.phi_ppp}) v->resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double sg = spec.vol(x[i]);
        const double s2h = 0.5 * sg * sg;
        const double mu = spec.drift(x[i]);
        a.psi[i] = (s2h * hat_psi_p[i] + mu * hat_psi[i]) / r;
        a.psi_p[i] = hat_psi[i];
        a.psi_pp[i] = hat_psi_p[i];
        a.psi_ppp[i] = hat_psi_pp[i];
        a.phi[i] = -(s2h * hat_phi_p[i] + mu * hat_phi[i]) / r;
        a.phi_p[i] = -hat_phi[i];
        a.phi_pp[i] = -hat_phi_p[i];
        a.phi_ppp[i] = -hat_phi_pp[i];
    }
    const double cpsi = a.psi[z];
    const double cphi = a.phi[z];
    if (!(cpsi > 0.0) || !(cphi > 0.0)) throw NumericalError("recovered psi or phi is not positive at 0");
    for (auto* v : {&a.psi, &a.psi_p, &a.psi_pp, &a.psi_ppp})
        for (double& e : *v) e /= cpsi;
    for (auto* v : {&a.phi, &a.phi_p, &a.phi_pp, &a.phi_ppp})
        for (double& e : *v) e /= cphi;
    a.log_scale = log_scale_on_grid(spec, grid, false);
    a.log_hat_scale = log_scale_on_grid(spec, grid, true);
    return FundamentalBasis(spec, r, grid, std::move(a), Normalization{0.0, 1.0, 1.0}, std::move(source));
}

HittingCoefficients hitting_coefficients(const FundamentalBasis& basis, double n) {
    if (!(n > 0.0) || n > basis.grid().x_hi()) throw InputError("hitting level n must lie in (0, x_hi]");
    const std::size_t z = basis.grid().zero_index();
    const double psi_p0 = basis.psi_p()[z];
    const double phi_p0 = basis.phi_p()[z];
    const double den = basis.phi_at(n) * psi_p0 - phi_p0 * basis.psi_at(n);
    if (!(std::abs(den) > 0.0) || !std::isfinite(den)) throw NumericalError("hitting coefficients: zero denominator");
    return {-phi_p0 / den, psi_p0 / den};
}

double hitting_laplace(const FundamentalBasis& basis, double x, double n) {
    if (!(x >= 0.0 && x <= n)) throw InputError("hitting_laplace needs 0 <= x <= n");
    if (x == n) return 1.0;
    const auto c = hitting_coefficients(basis, n);
    return c.A * basis.psi_at(x) + c.B * basis.phi_at(x);
}

void write_basis_csv(const FundamentalBasis& basis, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot open " + path + " for writing");
    out.precision(17);
    out << "x,psi,phi,psi_p,phi_p,hat_psi,hat_phi\n";
    const auto& x = basis.grid().points();
    for (std::size_t i = 0; i < x.size(); ++i)
        out << x[i] << ',' << basis.psi()[i] << ',' << basis.phi()[i] << ',' << basis.psi_p()[i] << ','
            << basis.phi_p()[i] << ',' << basis.psi_p()[i] << ',' << -basis.phi_p()[i] << '\n';
}

}  // namespace refctl
