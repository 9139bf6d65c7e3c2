#pragma once

#include "mib/core.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace mib {

/// Unnormalised log-density; -inf marks points outside the support.
using LogDensity = std::function<double(const Vector&)>;

/// Scalar summary g(theta) used for quantiles and interval estimates.
using ScalarMap = std::function<double(const Vector&)>;

/// Component-wise normal random-walk proposal.
struct ProposalSpec {
    Vector sd;

    static ProposalSpec isotropic(Index d, double sd) { return {Vector::Constant(d, sd)}; }
};

/// Post burn-in Metropolis states and their log-target values.
struct Chain {
    Matrix draws;              ///< B x d
    Vector log_post;           ///< B
    double acceptance_rate = 0.0;
    std::uint64_t seed = 0;
    Index burn_in = 0;

    Index size() const noexcept { return draws.rows(); }
    Index dim() const noexcept { return draws.cols(); }
};

inline Index default_burn_in(Index B) { return B / 10; }

/// Random-walk Metropolis. Runs burn_in + B steps and keeps the last B
/// states; acceptance_rate covers every step. The same arguments always
/// produce the same chain.
Chain metropolis(const LogDensity& target, const Vector& init, const ProposalSpec& proposal, Index B,
                 Index burn_in, std::uint64_t seed);

/// inf{x : F(x) >= q} for the empirical CDF F of `values`.
double empirical_quantile(std::vector<double> values, double q);

double chain_quantile(const Chain& chain, const ScalarMap& g, double q);

/// g(theta) = theta_j
ScalarMap coordinate(Index j);

} // namespace mib
