#include "refctl/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "refctl/errors.hpp"
#include "refctl/quadrature.hpp"

namespace refctl {

DiffusionSpec DiffusionSpec::brownian(double mu, double sigma) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw InputError("brownian: sigma must be positive");
    DiffusionSpec s;
    s.mu = SmoothFunction::constant(mu);
    s.sigma = SmoothFunction::constant(sigma);
    s.lipschitz_L = 1.0;
    s.name = "brownian";
    return s;
}

DiffusionSpec DiffusionSpec::ornstein_uhlenbeck(double mu, double theta, double sigma) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw InputError("ou: sigma must be positive");
    if (!(theta > 0.0) || !std::isfinite(theta)) throw InputError("ou: theta must be positive");
    DiffusionSpec s;
    s.mu = SmoothFunction::affine(mu, -theta);
    s.sigma = SmoothFunction::constant(sigma);
    s.lipschitz_L = std::max(1.0, theta);
    s.name = "ou";
    return s;
}

DiffusionSpec DiffusionSpec::from_expressions(const std::string& drift, const std::string& volatility) {
    DiffusionSpec s;
    s.mu = SmoothFunction::parse(drift);
    s.sigma = SmoothFunction::parse(volatility);
    s.name = "expression";
    return s;
}

// ---------------------------------------------------------------------------

Grid::Grid(std::vector<double> points, Spacing spacing) : points_(std::move(points)), spacing_(spacing) {
    if (points_.size() < 3) throw InputError("grid needs at least three points");
    for (std::size_t i = 0; i < points_.size(); ++i) {
        if (!std::isfinite(points_[i])) throw InputError("grid contains a non-finite point");
        if (i > 0 && !(points_[i] > points_[i - 1])) throw InputError("grid points must be strictly increasing");
    }
    const auto it = std::find(points_.begin(), points_.end(), 0.0);
    if (it == points_.end()) throw InputError("grid must contain 0 exactly");
    zero_ = static_cast<std::size_t>(it - points_.begin());
    if (!(points_.back() > 0.0)) throw InputError("grid must satisfy x_hi > 0");
}

Grid Grid::uniform(double lo, double hi, std::size_t cells) {
    if (!(lo <= 0.0 && hi > 0.0 && cells >= 2)) throw InputError("uniform grid needs x_lo <= 0 < x_hi and >= 2 cells");
    const double h = (hi - lo) / static_cast<double>(cells);
    std::vector<double> pts;
    const auto kmin = static_cast<long>(std::ceil(lo / h));
    const auto kmax = static_cast<long>(std::floor(hi / h));
    // Endpoints closer than h/4 to a lattice node replace that node.
    if (lo < 0.0 && static_cast<double>(kmin) * h - lo > 0.25 * h) pts.push_back(lo);
    for (long k = kmin; k <= kmax; ++k) {
        double v = static_cast<double>(k) * h;
        if (k == kmin && lo < 0.0 && v - lo <= 0.25 * h) v = lo;
        if (k == kmax && hi - v <= 0.25 * h && k != 0) v = hi;
        pts.push_back(v);
    }
    if (pts.back() < hi) pts.push_back(hi);
    return Grid(std::move(pts), Spacing::Uniform);
}

Grid Grid::geometric(double lo, double hi, double first_step, double ratio) {
    if (!(lo <= 0.0 && hi > 0.0 && first_step > 0.0 && ratio >= 1.0))
        throw InputError("geometric grid needs x_lo <= 0 < x_hi, first_step > 0, ratio >= 1");
    std::vector<double> neg, pos;
    double step = first_step;
    for (double x = first_step; x < hi; x += step, step *= ratio) pos.push_back(x);
    step = first_step;
    for (double x = -first_step; x > lo; x -= step, step *= ratio) neg.push_back(x);
    std::vector<double> pts;
    if (lo < 0.0) pts.push_back(lo);
    pts.insert(pts.end(), neg.rbegin(), neg.rend());
    pts.push_back(0.0);
    pts.insert(pts.end(), pos.begin(), pos.end());
    pts.push_back(hi);
    return Grid(std::move(pts), Spacing::Geometric);
}

std::size_t Grid::locate(double x) const {
    if (x <= points_.front()) return 0;
    if (x >= points_.back()) return points_.size() - 2;
    const auto it = std::upper_bound(points_.begin(), points_.end(), x);
    return static_cast<std::size_t>(it - points_.begin()) - 1;
}

std::vector<double> Grid::nonnegative_points() const {
    return {points_.begin() + static_cast<std::ptrdiff_t>(zero_), points_.end()};
}

// ---------------------------------------------------------------------------

std::pair<double, double> default_domain(const DiffusionSpec& spec, double r) {
    double r_o = r - spec.drift_prime(0.0);
    if (!(r_o > 0.0)) throw ModelError("default domain: r - mu'(0) must be positive");
    double s = spec.vol(0.0) / std::sqrt(2.0 * r_o);
    for (int i = 0; i <= 200; ++i) {
        const double x = -10.0 * s + 20.0 * s * i / 200.0;
        r_o = std::min(r_o, r - spec.drift_prime(x));
    }
    if (!(r_o > 0.0)) throw ModelError("default domain: inf (r - mu') is not positive near 0");
    s = spec.vol(0.0) / std::sqrt(2.0 * r_o);
    return {-10.0 * s, 10.0 * s};
}

namespace {

double scale_exponent_integrand(const DiffusionSpec& spec, double y, bool hat) {
    const double sg = spec.vol(y);
    if (!(sg > 0.0)) {
        std::ostringstream os;
        os << "sigma(" << y << ") = " << sg << " is not positive";
        throw InputError(os.str());
    }
    const double drift = hat ? spec.hat_drift(y) : spec.drift(y);
    return drift / (sg * sg);
}

double scale_impl(const DiffusionSpec& spec, double x, bool hat) {
    const double I = integrate([&](double y) { return scale_exponent_integrand(spec, y, hat); }, spec.x_anchor, x);
    return std::exp(-2.0 * I);
}

}  // namespace

double scale_density(const DiffusionSpec& spec, double x) { return scale_impl(spec, x, false); }
double hat_scale_density(const DiffusionSpec& spec, double x) { return scale_impl(spec, x, true); }

double speed_density(const DiffusionSpec& spec, double x) {
    const double sg = spec.vol(x);
    return 2.0 / (sg * sg * hat_scale_density(spec, x));
}

std::vector<double> log_scale_on_grid(const DiffusionSpec& spec, const Grid& grid, bool hat) {
    const auto& p = grid.points();
    const std::size_t n = p.size();
    const std::size_t z = grid.zero_index();
    auto g = [&](double y) { return scale_exponent_integrand(spec, y, hat); };
    std::vector<double> out(n, 0.0);
    // Offset so that the anchor x_o (not necessarily 0) maps to log S' = 0.
    out[z] = spec.x_anchor == 0.0 ? 0.0 : 2.0 * integrate(g, spec.x_anchor, 0.0);
    for (std::size_t i = z + 1; i < n; ++i) out[i] = out[i - 1] - 2.0 * kronrod15(g, p[i - 1], p[i]);
    for (std::size_t i = z; i-- > 0;) out[i] = out[i + 1] + 2.0 * kronrod15(g, p[i], p[i + 1]);
    return out;
}

namespace {
void require_finite(double f, double fp, double fpp, double x) {
    if (!std::isfinite(f) || !std::isfinite(fp) || !std::isfinite(fpp) || !std::isfinite(x))
        throw InputError("generator: non-finite input");
}
}  // namespace

double generator_X(const DiffusionSpec& spec, double f, double fp, double fpp, double x) {
    require_finite(f, fp, fpp, x);
    (void)f;
    const double sg = spec.vol(x);
    return 0.5 * sg * sg * fpp + spec.drift(x) * fp;
}

double generator_hatX(const DiffusionSpec& spec, double f, double fp, double fpp, double x) {
    require_finite(f, fp, fpp, x);
    (void)f;
    const double sg = spec.vol(x);
    return 0.5 * sg * sg * fpp + spec.hat_drift(x) * fp;
}

ValidationReport validate_assumptions(const DiffusionSpec& spec, double r, const Grid& grid) {
    ValidationReport rep;
    rep.min_r_minus_mu_prime = std::numeric_limits<double>::infinity();
    rep.min_sigma = std::numeric_limits<double>::infinity();
    rep.finite_difference_fallback = spec.mu.uses_finite_differences() || spec.sigma.uses_finite_differences();
    bool finite = true;
    for (double x : grid.points()) {
        const double mp = spec.drift_prime(x);
        const double sp = spec.vol_prime(x);
        const double sg = spec.vol(x);
        if (!std::isfinite(mp) || !std::isfinite(sp) || !std::isfinite(sg) || !std::isfinite(spec.drift(x)))
            finite = false;
        rep.min_r_minus_mu_prime = std::min(rep.min_r_minus_mu_prime, r - mp);
        rep.max_abs_mu_prime = std::max(rep.max_abs_mu_prime, std::abs(mp));
        rep.max_abs_sigma_prime = std::max(rep.max_abs_sigma_prime, std::abs(sp));
        rep.min_sigma = std::min(rep.min_sigma, sg);
    }
    rep.discount_ok = finite && r > 0.0 && rep.min_r_minus_mu_prime > 0.0;
    rep.sigma_ok = finite && rep.min_sigma > 0.0;
    rep.lipschitz_ok =
        finite && rep.max_abs_mu_prime <= spec.lipschitz_L && rep.max_abs_sigma_prime <= spec.lipschitz_L;
    if (!finite) rep.messages.emplace_back("drift or volatility is not finite on the grid");
    if (!(r > 0.0)) rep.messages.emplace_back("discount rate r must be positive");
    if (!rep.discount_ok) rep.messages.emplace_back("r - mu'(x) is not bounded away from 0 on the grid");
    if (!rep.sigma_ok) rep.messages.emplace_back("sigma(x) is not strictly positive on the grid");
    if (!rep.lipschitz_ok) rep.messages.emplace_back("|mu'| or |sigma'| exceeds the Lipschitz constant L");
    if (rep.finite_difference_fallback)
        rep.messages.emplace_back("drift or volatility derivatives come from finite differences");
    return rep;
}

}  // namespace refctl
