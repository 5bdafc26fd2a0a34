#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "refctl/expression.hpp"

namespace refctl {

/// Drift and volatility of the uncontrolled diffusion
///   dX = mu(X) dt + sigma(X) dW,
/// together with the derivatives needed by the companion diffusion
///   dX^ = (mu + sigma sigma')(X^) dt + sigma(X^) dW.
struct DiffusionSpec {
    SmoothFunction mu;
    SmoothFunction sigma;
    double lipschitz_L = 1e6;
    double x_anchor = 0.0;
    std::string name = "custom";

    double drift(double x) const { return mu(x); }
    double drift_prime(double x) const { return mu.d1(x); }
    double vol(double x) const { return sigma(x); }
    double vol_prime(double x) const { return sigma.d1(x); }
    double hat_drift(double x) const { return mu(x) + sigma(x) * sigma.d1(x); }

    static DiffusionSpec brownian(double mu, double sigma);
    /// dX = (mu - theta X) dt + sigma dW
    static DiffusionSpec ornstein_uhlenbeck(double mu, double theta, double sigma);
    static DiffusionSpec from_expressions(const std::string& drift, const std::string& volatility);
};

/// A strictly increasing set of nodes that contains 0 exactly.
class Grid {
public:
    enum class Spacing { Uniform, Geometric, Custom };

    explicit Grid(std::vector<double> points, Spacing spacing = Spacing::Custom);

    /// Nodes k*h (h = (hi - lo)/cells) clipped to [lo, hi], plus both endpoints.
    static Grid uniform(double lo, double hi, std::size_t cells);
    /// Cell widths grow by `ratio` moving away from 0 in both directions.
    static Grid geometric(double lo, double hi, double first_step, double ratio);

    const std::vector<double>& points() const { return points_; }
    std::size_t size() const { return points_.size(); }
    double operator[](std::size_t i) const { return points_[i]; }
    double x_lo() const { return points_.front(); }
    double x_hi() const { return points_.back(); }
    std::size_t zero_index() const { return zero_; }
    Spacing spacing() const { return spacing_; }

    /// Index i of the cell [p_i, p_{i+1}] holding x (clamped to the grid).
    std::size_t locate(double x) const;
    /// Nodes in [0, x_hi].
    std::vector<double> nonnegative_points() const;

private:
    std::vector<double> points_;
    std::size_t zero_ = 0;
    Spacing spacing_;
};

/// Default truncation [-10 s, 10 s], s = sigma(0)/sqrt(2 r_o), r_o = inf (r - mu').
std::pair<double, double> default_domain(const DiffusionSpec& spec, double r);

/// S'(x) = exp(-2 int_{x_o}^x mu/sigma^2).
double scale_density(const DiffusionSpec& spec, double x);
/// S^'(x) = exp(-2 int_{x_o}^x (mu + sigma sigma')/sigma^2).
double hat_scale_density(const DiffusionSpec& spec, double x);
/// m^'(x) = 2 / (sigma^2(x) S^'(x)).
double speed_density(const DiffusionSpec& spec, double x);

/// log S' (or log S^' when `hat`) at every node, accumulated cell by cell.
std::vector<double> log_scale_on_grid(const DiffusionSpec& spec, const Grid& grid, bool hat);

double generator_X(const DiffusionSpec& spec, double f, double fp, double fpp, double x);
double generator_hatX(const DiffusionSpec& spec, double f, double fp, double fpp, double x);

struct ValidationReport {
    double min_r_minus_mu_prime = 0.0;
    double max_abs_mu_prime = 0.0;
    double max_abs_sigma_prime = 0.0;
    double min_sigma = 0.0;
    bool discount_ok = false;   // inf (r - mu') > 0
    bool lipschitz_ok = false;  // |mu'|, |sigma'| <= L
    bool sigma_ok = false;      // sigma > 0
    bool finite_difference_fallback = false;
    std::vector<std::string> messages;

    bool passed() const { return discount_ok && lipschitz_ok && sigma_ok; }
};

ValidationReport validate_assumptions(const DiffusionSpec& spec, double r, const Grid& grid);

}  // namespace refctl
