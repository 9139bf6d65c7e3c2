#pragma once

#include "mib/core.hpp"
#include "mib/likelihood.hpp"
#include "mib/quadrature.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace mib {

/// A candidate: a non-empty subset of the p moments and the set of free
/// parameter components (the others are fixed at zero). Both are sorted,
/// 0-based index lists.
struct Combination {
    std::vector<int> moments;
    std::vector<int> free;

    Index m() const noexcept { return static_cast<Index>(moments.size()); }
    Index t() const noexcept { return static_cast<Index>(free.size()); }

    auto operator<=>(const Combination&) const = default;
    bool operator==(const Combination&) const = default;

    /// Checks sortedness, uniqueness and ranges.
    void validate(Index p, Index k) const;
};

/// 1-based rendering such as "M{3,4,5}|T{1}".
std::string to_string(const Combination& c);
/// "3 4 5" style 1-based list used in report columns.
std::string index_list(const std::vector<int>& idx);

/// Allow-lists; an empty list leaves that part unrestricted.
struct CandidateConstraints {
    std::vector<std::vector<int>> moment_subsets;
    std::vector<std::vector<int>> free_masks;
};

/// All 2^k (2^p - 1) candidates (or the allowed sublist) in lexicographic order.
std::vector<Combination> enumerate_candidates(Index p, Index k, const CandidateConstraints& constraints = {});

/// True when some grid point of the masked box satisfies the selected
/// population moments up to a Lipschitz slack of sum_k |A_jk| * spacing.
bool true_combination_oracle(const Combination& comb, const AffineTerms& population, const ThetaBox& box,
                             double spacing);

/// log n^{alpha (m - t)}
double candidate_prior_a1(const Combination& comb, Index n, double alpha);

/// Log candidate prior as a function of (combination, n). Used for
/// user-supplied candidate priors.
using CandidateLogPrior = std::function<double(const Combination&, Index n)>;

/// Rejects priors whose log grows faster than a bounded multiple of ln n
/// (for instance exp(n * ...) weights).
void check_polynomial_candidate_prior(const CandidateLogPrior& prior, Index p, Index k);

struct IntegrationSettings {
    QuadratureOptions quadrature{};
    int mc_samples = 20000;     ///< for three or more free components
    std::uint64_t seed = 20190101;
    OrthantSettings orthant{};
};

struct Evidence {
    double log_value = 0.0;
    double rel_error = 0.0;
};

/// ln of prod_{j in s} psi_j * integral of p(theta | C) P(Z >= 0)
/// exp(-psi' m_s(theta) + psi' V_s psi / 2n) over the free components.
/// The prior is the marginal of `theta_prior` on the free components.
Evidence log_integrated_likelihood_a1(const Combination& comb, const MomentModel& model, const Dataset& data,
                                      const Hyperparameters& hyper, const ThetaPrior& theta_prior,
                                      const IntegrationSettings& settings = {});

/// Block decomposition of S_n = V/n + blockdiag(0_m, sigma2 I) with V reordered
/// as (selected, unselected); S_n^{-1} = n [[sigma1, sigma3], [sigma3', sigma2]].
struct ApproachTwoBlocks {
    std::vector<int> selected;
    std::vector<int> unselected;
    Matrix S;
    Matrix sigma1;   ///< m x m
    Matrix sigma2;   ///< (p-m) x (p-m)
    Matrix sigma3;   ///< m x (p-m)
    Matrix V2;       ///< V_22 + n sigma2 I
    double sigma_n2 = 0.0;
    Index n = 0;
};

ApproachTwoBlocks assemble_a2_blocks(const Combination& comb, const Hyperparameters& hyper, Index n,
                                     double sigma_n2);

/// Per-theta log likelihood under the working priors (biases of unselected
/// moments ~ N(0, sigma2 I), exponential biases for selected moments), with
/// every Gaussian normalising constant kept. Affine models only.
class ApproachTwoLikelihood {
public:
    ApproachTwoLikelihood(const Combination& comb, const MomentModel& model, const Dataset& data,
                          const Hyperparameters& hyper, double sigma_n2, OrthantSettings orthant = {});

    double operator()(const Vector& theta) const;
    const ApproachTwoBlocks& blocks() const noexcept { return blocks_; }

private:
    ApproachTwoBlocks blocks_;
    Vector psi_;
    Matrix shift_A_;      ///< rows of a + sigma1^{-1} sigma3 b as affine map
    Vector shift_b_;
    Matrix unsel_A_;
    Vector unsel_b_;
    Matrix w_cov_;        ///< sigma1^{-1} / n
    Vector w_cov_psi_;
    double const_ = 0.0;  ///< theta-free terms
    Eigen::LLT<Matrix> v2_llt_;
    Index n_ = 0;
    OrthantSettings orthant_;
};

/// Integrates ApproachTwoLikelihood against the N_t(0, n sigma2 I) prior on
/// the free components over [-8 sd, 8 sd], intersected with `domain` when given.
Evidence log_integrated_likelihood_a2(const Combination& comb, const MomentModel& model, const Dataset& data,
                                      const Hyperparameters& hyper, double sigma_n2,
                                      const std::optional<ThetaBox>& domain = std::nullopt,
                                      const IntegrationSettings& settings = {});

struct ApproachOne {
    double alpha = 1.0;
    ThetaPrior theta_prior;
};

struct ApproachTwo {
    double sigma_n2 = 0.0;
    std::optional<ThetaBox> domain;
};

using Approach = std::variant<ApproachOne, ApproachTwo>;

struct CandidateResult {
    Combination comb;
    double log_evidence = 0.0;
    double log_prior = 0.0;
    double weight = 0.0;
    double rel_error = 0.0;
};

struct CandidatePosterior {
    std::string approach;      ///< "A1" or "A2"
    double param = 0.0;        ///< alpha for A1, sigma_n^2 for A2
    std::vector<CandidateResult> candidates; ///< input order
    std::size_t argmax = 0;

    const Combination& best() const { return candidates.at(argmax).comb; }
    double weight_of(const Combination& c) const;
};

/// Maximum posterior criterion over `candidates`. A1 uses the n^{alpha (m - t)}
/// candidate prior unless `custom_prior` is given; A2 uses a uniform one.
/// Ties in weight go to the lexicographically smallest combination.
CandidatePosterior mpc_select(const std::vector<Combination>& candidates, const MomentModel& model,
                              const Dataset& data, const Hyperparameters& hyper, const Approach& approach,
                              const IntegrationSettings& settings = {},
                              const CandidateLogPrior& custom_prior = nullptr);

/// Normalises log-evidence + log-prior into weights and picks the argmax.
void normalise_weights(CandidatePosterior& post);

} // namespace mib
