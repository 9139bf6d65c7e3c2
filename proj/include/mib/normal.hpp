#pragma once

namespace mib {

double norm_pdf(double x);
double norm_cdf(double x);

/// ln Phi(x), accurate far into the lower tail. Below x = -10 the value comes
/// from a continued fraction for the Mills ratio, so it stays finite for every
/// finite x; only x = -inf maps to -inf.
double log_norm_cdf(double x);

/// ln(exp(a) + exp(b)) without overflow; either argument may be -inf.
double log_add_exp(double a, double b);

} // namespace mib
