#pragma once

#include <string>
#include <vector>

#include "refctl/diffusion.hpp"

namespace refctl {

/// Quality measures of a computed basis. Residuals are relative to the sum
/// of the absolute values of the ODE terms; the second derivative inside each
/// residual comes from a 5-point finite difference of the logarithmic
/// derivative on the grid, so it tests the computed values independently of
/// the ODE identity used to store u''.
struct BasisDiagnostics {
    double wronskian_rel_std = 0.0;
    double hat_wronskian_rel_std = 0.0;
    double ode_residual_max = 0.0;
    double hat_ode_residual_max = 0.0;
    /// max |psi'_fd - psi^| / (1 + |psi^|) and likewise for phi.
    double lemma_a1_max = 0.0;
    bool psi_increasing = false;
    bool phi_decreasing = false;
    bool hat_psi_increasing = false;
    bool hat_phi_decreasing = false;
    /// Truncation proxies for natural boundaries: psi(x_hi) and phi'(x_hi)/S'(x_hi).
    double psi_at_x_hi = 0.0;
    double phi_flux_at_x_hi = 0.0;

    bool monotone() const { return psi_increasing && phi_decreasing && hat_psi_increasing && hat_phi_decreasing; }
};

/// Positive scale factors applied to the raw solutions; after normalization
/// psi(x_point) and phi(x_point) equal psi_value and phi_value.
struct Normalization {
    double x_point = 0.0;
    double psi_value = 1.0;
    double phi_value = 1.0;
};

/// Grid samples of the fundamental solutions psi (increasing) and phi
/// (decreasing) of (L_X - r)u = 0, their first three derivatives, and the
/// companion pair psi^ = psi', phi^ = -phi' of (L_X^ - (r - mu'))u = 0.
class FundamentalBasis {
public:
    struct Arrays {
        std::vector<double> psi, psi_p, psi_pp, psi_ppp;
        std::vector<double> phi, phi_p, phi_pp, phi_ppp;
        std::vector<double> log_scale, log_hat_scale;
    };

    FundamentalBasis(DiffusionSpec spec, double r, Grid grid, Arrays arrays, Normalization norm, std::string source);

    const DiffusionSpec& spec() const { return spec_; }
    double r() const { return r_; }
    const Grid& grid() const { return grid_; }
    const std::string& source() const { return source_; }
    const Normalization& normalization() const { return norm_; }
    const BasisDiagnostics& diagnostics() const { return diag_; }

    double W() const { return W_; }
    double w() const { return w_; }

    const std::vector<double>& psi() const { return a_.psi; }
    const std::vector<double>& psi_p() const { return a_.psi_p; }
    const std::vector<double>& psi_pp() const { return a_.psi_pp; }
    const std::vector<double>& phi() const { return a_.phi; }
    const std::vector<double>& phi_p() const { return a_.phi_p; }
    const std::vector<double>& phi_pp() const { return a_.phi_pp; }
    std::vector<double> hat_psi() const { return a_.psi_p; }
    std::vector<double> hat_psi_p() const { return a_.psi_pp; }
    std::vector<double> hat_phi() const;
    std::vector<double> hat_phi_p() const;
    const std::vector<double>& log_scale() const { return a_.log_scale; }
    const std::vector<double>& log_hat_scale() const { return a_.log_hat_scale; }

    // Cubic Hermite evaluation between nodes (in log space where the sampled
    // function is positive).
    double psi_at(double x) const;
    double psi_p_at(double x) const;
    double psi_pp_at(double x) const;
    double phi_at(double x) const;
    double phi_p_at(double x) const;
    double phi_pp_at(double x) const;
    double hat_psi_at(double x) const { return psi_p_at(x); }
    double hat_psi_p_at(double x) const { return psi_pp_at(x); }
    double hat_phi_at(double x) const { return -phi_p_at(x); }
    double hat_phi_p_at(double x) const { return -phi_pp_at(x); }
    double scale_at(double x) const;
    double hat_scale_at(double x) const;
    double speed_at(double x) const;

    /// Same basis with psi <- c_psi * psi and phi <- c_phi * phi.
    FundamentalBasis rescaled(double c_psi, double c_phi) const;

private:
    enum class Which { Psi, PsiP, PsiPP, Phi, PhiP, PhiPP };
    double eval(Which which, double x) const;
    void compute_diagnostics();

    DiffusionSpec spec_;
    double r_;
    Grid grid_;
    Arrays a_;
    Normalization norm_;
    std::string source_;
    double W_ = 0.0;
    double w_ = 0.0;
    BasisDiagnostics diag_;
};

struct BasisOptions {
    double abs_tol = 1e-13;
    double rel_tol = 1e-13;
    /// Shooting starts this fraction of the domain width beyond each end.
    double shooting_pad = 0.2;
};

/// Shoots psi forward from x_lo and phi backward from x_hi in logarithmic
/// variables (y = ln u, p = u'/u), normalizing psi(0) = phi(0) = 1.
FundamentalBasis compute_basis(const DiffusionSpec& spec, double r, const Grid& grid, const BasisOptions& opt = {});

/// Builds a basis from psi^, psi^', psi^'' and phi^, phi^', phi^'' sampled on
/// the grid (e.g. closed forms). psi and phi are recovered algebraically from
/// the X equation: r psi = sigma^2/2 psi^' + mu psi^, r phi = -(sigma^2/2 phi^' + mu phi^).
FundamentalBasis basis_from_hat_functions(const DiffusionSpec& spec, double r, const Grid& grid,
                                          const std::vector<double>& hat_psi, const std::vector<double>& hat_psi_p,
                                          const std::vector<double>& hat_psi_pp, const std::vector<double>& hat_phi,
                                          const std::vector<double>& hat_phi_p, const std::vector<double>& hat_phi_pp,
                                          std::string source);

struct HittingCoefficients {
    double A = 0.0;
    double B = 0.0;
};

/// Coefficients of f(x; n) = A psi(x) + B phi(x) with f(n; n) = 1, f'(0; n) = 0.
HittingCoefficients hitting_coefficients(const FundamentalBasis& basis, double n);

/// E_x[exp(-r sigma_n)] for the diffusion reflected at 0, sigma_n the first
/// hitting time of n.
double hitting_laplace(const FundamentalBasis& basis, double x, double n);

/// Columns x, psi, phi, psi', phi', psi^, phi^.
void write_basis_csv(const FundamentalBasis& basis, const std::string& path);

/// 5-point finite-difference weights for the first derivative at x[i]
/// on an arbitrary grid (one-sided near the ends).
std::vector<double> first_derivative_fd(const std::vector<double>& x, const std::vector<double>& f);

}  // namespace refctl
