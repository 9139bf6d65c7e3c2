#include "mib/normal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace mib {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

// Continued fraction x + 1/(x + 2/(x + 3/(x + ...))) evaluated backwards.
// Phi(-x) = phi(x) / cf(x) for x > 0; 60 terms are exact to rounding for x >= 10.
double mills_denominator(double x) {
    double r = x;
    for (int k = 60; k >= 1; --k) r = x + k / r;
    return r;
}

} // namespace

double norm_pdf(double x) { return std::exp(-0.5 * x * x - kHalfLog2Pi); }

double norm_cdf(double x) { return 0.5 * std::erfc(-x * kInvSqrt2); }

double log_norm_cdf(double x) {
    if (std::isnan(x)) return x;
    if (x == -std::numeric_limits<double>::infinity()) return x;
    if (x > 0.0) return std::log1p(-0.5 * std::erfc(x * kInvSqrt2));
    if (x > -10.0) return std::log(0.5 * std::erfc(-x * kInvSqrt2));
    const double t = -x;
    return -0.5 * t * t - kHalfLog2Pi - std::log(mills_denominator(t));
}

double log_add_exp(double a, double b) {
    if (a == -std::numeric_limits<double>::infinity()) return b;
    if (b == -std::numeric_limits<double>::infinity()) return a;
    const double hi = std::max(a, b);
    return hi + std::log1p(std::exp(-std::abs(a - b)));
}

} // namespace mib
