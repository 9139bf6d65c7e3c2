#pragma once

#include <functional>
#include <vector>

namespace mib {

/// n-point Gauss-Legendre rule on [-1, 1].
struct GaussLegendreRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

GaussLegendreRule gauss_legendre(int n);

struct QuadratureOptions {
    double rel_tol = 1e-6;
    int order = 10;             ///< Gauss-Legendre points per panel
    int initial_panels = 32;
    int max_panels = 20000;
};

/// Integral of exp(log_f) reported on the log scale.
struct QuadratureResult {
    double log_value = 0.0;
    double rel_error = 0.0;     ///< estimated |error| / |integral|
    long evaluations = 0;
    bool converged = false;
};

/// Globally adaptive Gauss-Legendre integration of exp(log_f(x)) over [a, b].
/// Panels are bisected in order of their error estimate (|G(panel) - G(left)
/// - G(right)|) until the summed estimate falls below rel_tol times the
/// integral. The integrand is rescaled by its largest sampled value, so
/// log-integrands far below double range still integrate.
QuadratureResult integrate_exp(const std::function<double(double)>& log_f, double a, double b,
                               const QuadratureOptions& opts = {});

/// Iterated version over [ax, bx] x [ay, by]; the inner integral starts from a
/// quarter of the panels and runs at a tenth of the outer tolerance.
QuadratureResult integrate_exp_2d(const std::function<double(double, double)>& log_f, double ax, double bx,
                                  double ay, double by, const QuadratureOptions& opts = {});

} // namespace mib
