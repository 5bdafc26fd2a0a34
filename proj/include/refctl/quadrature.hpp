#pragma once

#include <functional>

namespace refctl {

struct QuadOptions {
    double abs_tol = 1e-12;
    double rel_tol = 1e-10;
    int max_subintervals = 2000;
};

struct QuadResult {
    double value = 0.0;
    double error = 0.0;
    int subintervals = 0;
};

/// Adaptive Gauss-Kronrod (7/15) on the finite interval [a, b]; a > b gives
/// the negated integral. Stops when the error estimate is below
/// max(abs_tol, rel_tol * |value|). Throws NumericalError otherwise.
QuadResult integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                              const QuadOptions& opt = {});

/// Convenience wrapper returning only the value.
double integrate(const std::function<double(double)>& f, double a, double b, const QuadOptions& opt = {});

/// Single 15-point Kronrod rule on [a, b] with no adaptivity. Used for
/// integrating smooth interpolants over one grid cell.
template <class F>
double kronrod15(F&& f, double a, double b);

namespace detail {
inline constexpr double kXgk[8] = {0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
                                   0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
                                   0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
                                   0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr double kWgk[8] = {0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
                                   0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
                                   0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
                                   0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr double kWg[4] = {0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                                  0.381830050505118944950369775488975, 0.417959183673469387755102040816327};
}  // namespace detail

template <class F>
double kronrod15(F&& f, double a, double b) {
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    double sum = detail::kWgk[7] * f(c);
    for (int j = 0; j < 7; ++j) {
        const double dx = h * detail::kXgk[j];
        sum += detail::kWgk[j] * (f(c - dx) + f(c + dx));
    }
    return sum * h;
}

}  // namespace refctl
