#pragma once

#include "mib/core.hpp"

#include <cstdint>
#include <optional>

namespace mib {

enum class OrthantMethod { automatic, diagonal_exact, monte_carlo };

/// How P(Z >= 0) is computed when the covariance is not diagonal.
struct OrthantSettings {
    OrthantMethod method = OrthantMethod::automatic;
    int mc_samples = 65536;
    std::uint64_t seed = 0x6d69622d6f727468ULL;
};

/// P(Z >= 0) for Z ~ N_p(mean, cov).
struct OrthantQuery {
    Vector mean;
    Matrix cov;
    OrthantMethod method = OrthantMethod::automatic;
    int mc_samples = 65536;
    std::uint64_t seed = 0x6d69622d6f727468ULL;

    static OrthantQuery from(Vector mean, Matrix cov, const OrthantSettings& s) {
        return {std::move(mean), std::move(cov), s.method, s.mc_samples, s.seed};
    }
};

struct OrthantEstimate {
    double probability = 0.0;
    double std_error = 0.0; ///< zero for the exact diagonal product
    bool exact = false;
};

/// Union-bound lower and min-marginal upper bounds on P(Z >= 0):
///   lower = max(0, 1 - p Phi(-min_j mean_j / sqrt(cov_jj))),
///   upper = Phi(min_j mean_j / sqrt(cov_jj)).
struct OrthantBounds {
    double lower = 0.0;
    double upper = 1.0;
};

/// Off-diagonal entries below 1e-14 of the largest diagonal entry.
bool is_effectively_diagonal(const Matrix& cov);

OrthantBounds orthant_bounds(const Vector& mean, const Matrix& cov);

/// Exact product of marginal normal CDFs for diagonal covariances, otherwise a
/// seeded antithetic Monte Carlo estimate through the Cholesky factor. Monte
/// Carlo results are checked against `orthant_bounds` (a violation beyond four
/// standard errors is a NumericalError) and then clipped to them.
OrthantEstimate orthant_estimate(const OrthantQuery& q);
double orthant_probability(const OrthantQuery& q);

/// ln P(Z >= 0). The diagonal path sums ln Phi terms and never underflows.
double log_orthant_probability(const OrthantQuery& q);

/// ln L(theta) given the moment mean m-bar(theta):
///   ln P(Z >= 0) - psi' m-bar + psi' V psi / (2n) + sum_i ln psi_i,
/// with Z ~ N(m-bar - V psi / n, V / n).
double log_limited_likelihood_from_moments(const Vector& moment_mean, const Hyperparameters& hyper, double n,
                                           const OrthantSettings& settings = {});

/// Immutable bundle of model, data and hyperparameters with the
/// theta-independent pieces of the likelihood precomputed.
class LogLikelihoodContext {
public:
    LogLikelihoodContext(MomentModel model, Dataset data, Hyperparameters hyper, OrthantSettings settings = {});

    const MomentModel& model() const noexcept { return model_; }
    const Dataset& data() const noexcept { return data_; }
    const Hyperparameters& hyper() const noexcept { return hyper_; }
    const OrthantSettings& settings() const noexcept { return settings_; }
    Index n() const noexcept { return data_.n(); }
    Index dim() const noexcept { return model_.d(); }

    /// Averaged coefficients; set only for affine models.
    const std::optional<AffineTerms>& affine_mean() const noexcept { return affine_mean_; }
    /// psi' V psi / (2n)
    double half_quadratic_term() const noexcept { return half_quad_; }
    /// sum_i ln psi_i
    double log_psi_sum() const noexcept { return log_psi_sum_; }

    Vector moment_mean(const Vector& theta) const;

private:
    MomentModel model_;
    Dataset data_;
    Hyperparameters hyper_;
    OrthantSettings settings_;
    std::optional<AffineTerms> affine_mean_;
    double half_quad_ = 0.0;
    double log_psi_sum_ = 0.0;
};

double log_limited_likelihood(const LogLikelihoodContext& ctx, const Vector& theta);

/// ln p(theta) + ln L(theta); -inf outside the prior's box.
double log_posterior_unnorm(const LogLikelihoodContext& ctx, const ThetaPrior& prior, const Vector& theta);

} // namespace mib
