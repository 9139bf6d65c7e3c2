#include "mib/likelihood.hpp"

#include "mib/normal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace mib {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void validate_query(const Vector& mean, const Matrix& cov) {
    if (mean.size() < 1) throw DimensionError("orthant query needs p >= 1");
    if (cov.rows() != mean.size() || cov.cols() != mean.size()) {
        throw DimensionError("orthant covariance must be p x p");
    }
    if (!mean.allFinite()) throw Error("orthant mean must be finite");
}

Matrix cholesky_or_throw(const Matrix& cov) {
    if (!cov.allFinite() || (cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-12 * cov.cwiseAbs().maxCoeff()) {
        throw NumericalError("orthant covariance is not symmetric");
    }
    Eigen::LLT<Matrix> llt(cov);
    if (llt.info() != Eigen::Success) throw NumericalError("orthant covariance is not positive definite");
    return llt.matrixL();
}

double min_standardized(const Vector& mean, const Matrix& cov) {
    double z = std::numeric_limits<double>::infinity();
    for (Index j = 0; j < mean.size(); ++j) z = std::min(z, mean[j] / std::sqrt(cov(j, j)));
    return z;
}

OrthantEstimate monte_carlo(const Vector& mean, const Matrix& L, int samples, std::uint64_t seed) {
    const Index p = mean.size();
    const long pairs = std::max(1L, (static_cast<long>(samples) + 1) / 2);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector z(p);
    double sum = 0.0;
    double sum_sq = 0.0;
    for (long k = 0; k < pairs; ++k) {
        for (Index j = 0; j < p; ++j) z[j] = normal(rng);
        const Vector shift = L * z;
        const bool plus = ((mean + shift).array() >= 0.0).all();
        const bool minus = ((mean - shift).array() >= 0.0).all();
        const double v = 0.5 * (static_cast<double>(plus) + static_cast<double>(minus));
        sum += v;
        sum_sq += v * v;
    }
    const double np = static_cast<double>(pairs);
    const double est = sum / np;
    const double var = pairs > 1 ? std::max(0.0, (sum_sq - np * est * est) / (np - 1.0)) : 0.0;
    const double floor_se = 1.0 / (2.0 * np);
    return {est, std::max(std::sqrt(var / np), floor_se), false};
}

} // namespace

bool is_effectively_diagonal(const Matrix& cov) {
    const double scale = cov.diagonal().cwiseAbs().maxCoeff();
    for (Index i = 0; i < cov.rows(); ++i) {
        for (Index j = 0; j < cov.cols(); ++j) {
            if (i != j && std::abs(cov(i, j)) >= 1e-14 * scale) return false;
        }
    }
    return true;
}

OrthantBounds orthant_bounds(const Vector& mean, const Matrix& cov) {
    validate_query(mean, cov);
    cholesky_or_throw(cov);
    const double zmin = min_standardized(mean, cov);
    const double p = static_cast<double>(mean.size());
    const double upper = norm_cdf(zmin);
    return {std::clamp(1.0 - p * norm_cdf(-zmin), 0.0, upper), upper};
}

OrthantEstimate orthant_estimate(const OrthantQuery& q) {
    validate_query(q.mean, q.cov);
    if (q.mc_samples < 1) throw Error("mc_samples must be >= 1");
    const Matrix L = cholesky_or_throw(q.cov);
    const bool diagonal = is_effectively_diagonal(q.cov);

    if (q.method == OrthantMethod::diagonal_exact && !diagonal) {
        throw Error("diagonal-exact orthant method requested for a non-diagonal covariance");
    }
    if (diagonal && q.method != OrthantMethod::monte_carlo) {
        double prob = 1.0;
        for (Index j = 0; j < q.mean.size(); ++j) prob *= norm_cdf(q.mean[j] / std::sqrt(q.cov(j, j)));
        return {prob, 0.0, true};
    }

    auto est = monte_carlo(q.mean, L, q.mc_samples, q.seed);
    const auto bounds = orthant_bounds(q.mean, q.cov);
    const double slack = 4.0 * est.std_error + 1.0 / static_cast<double>(q.mc_samples);
    if (est.probability < bounds.lower - slack || est.probability > bounds.upper + slack) {
        throw NumericalError("Monte Carlo orthant estimate falls outside its analytic bounds");
    }
    est.probability = std::clamp(est.probability, bounds.lower, bounds.upper);
    return est;
}

double orthant_probability(const OrthantQuery& q) { return orthant_estimate(q).probability; }

double log_orthant_probability(const OrthantQuery& q) {
    validate_query(q.mean, q.cov);
    const bool diagonal = is_effectively_diagonal(q.cov);
    if (diagonal && q.method != OrthantMethod::monte_carlo) {
        if (q.mc_samples < 1) throw Error("mc_samples must be >= 1");
        if ((q.cov.diagonal().array() <= 0.0).any()) {
            throw NumericalError("orthant covariance is not positive definite");
        }
        double lp = 0.0;
        for (Index j = 0; j < q.mean.size(); ++j) lp += log_norm_cdf(q.mean[j] / std::sqrt(q.cov(j, j)));
        return lp;
    }
    const double prob = orthant_estimate(q).probability;
    return prob > 0.0 ? std::log(prob) : kNegInf;
}

double log_limited_likelihood_from_moments(const Vector& moment_mean, const Hyperparameters& hyper, double n,
                                           const OrthantSettings& settings) {
    if (moment_mean.size() != hyper.p()) {
        throw DimensionError("moment mean has length " + std::to_string(moment_mean.size()) + ", psi has " +
                             std::to_string(hyper.p()));
    }
    const Vector& psi = hyper.psi();
    const Matrix& V = hyper.V();
    const Vector v_psi = V * psi;
    auto q = OrthantQuery::from(moment_mean - v_psi / n, V / n, settings);
    const double log_p = log_orthant_probability(q);
    if (log_p == kNegInf) return kNegInf;
    return log_p - psi.dot(moment_mean) + psi.dot(v_psi) / (2.0 * n) + psi.array().log().sum();
}

// ---------------------------------------------------------------------------

LogLikelihoodContext::LogLikelihoodContext(MomentModel model, Dataset data, Hyperparameters hyper,
                                           OrthantSettings settings)
    : model_(std::move(model)), data_(std::move(data)), hyper_(std::move(hyper)), settings_(settings) {
    if (hyper_.p() != model_.p()) {
        throw DimensionError("hyperparameters have " + std::to_string(hyper_.p()) + " moments, model has " +
                             std::to_string(model_.p()));
    }
    model_.bind(data_);
    if (model_.is_affine()) affine_mean_ = average_affine_terms(model_, data_);
    const double n = static_cast<double>(data_.n());
    half_quad_ = hyper_.psi().dot(hyper_.V() * hyper_.psi()) / (2.0 * n);
    log_psi_sum_ = hyper_.psi().array().log().sum();
}

Vector LogLikelihoodContext::moment_mean(const Vector& theta) const {
    if (theta.size() != model_.d()) {
        throw DimensionError("theta has length " + std::to_string(theta.size()) + ", model expects " +
                             std::to_string(model_.d()));
    }
    if (!theta.allFinite()) throw Error("theta must be finite");
    if (affine_mean_) return (*affine_mean_)(theta);
    return sample_moment_mean(model_, data_, theta);
}

double log_limited_likelihood(const LogLikelihoodContext& ctx, const Vector& theta) {
    const Vector mbar = ctx.moment_mean(theta);
    const double n = static_cast<double>(ctx.n());
    const Hyperparameters& h = ctx.hyper();
    auto q = OrthantQuery::from(mbar - h.V() * h.psi() / n, h.V() / n, ctx.settings());
    const double log_p = log_orthant_probability(q);
    if (log_p == kNegInf) return kNegInf;
    return log_p - h.psi().dot(mbar) + ctx.half_quadratic_term() + ctx.log_psi_sum();
}

double log_posterior_unnorm(const LogLikelihoodContext& ctx, const ThetaPrior& prior, const Vector& theta) {
    if (prior.dim() != ctx.dim()) throw DimensionError("prior dimension does not match the model");
    const double lp = prior.log_density(theta);
    if (lp == kNegInf) return kNegInf;
    return lp + log_limited_likelihood(ctx, theta);
}

} // namespace mib
