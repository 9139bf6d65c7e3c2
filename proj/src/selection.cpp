#include "mib/selection.hpp"

#include "mib/normal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

namespace mib {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
const double kLog2Pi = std::log(2.0 * std::numbers::pi);

std::vector<int> complement(const std::vector<int>& idx, Index p) {
    std::vector<int> out;
    for (int j = 0; j < p; ++j) {
        if (!std::binary_search(idx.begin(), idx.end(), j)) out.push_back(j);
    }
    return out;
}

/// theta with free components set from `x` and the rest at zero.
Vector embed(const Vector& x, const std::vector<int>& free, Index d) {
    Vector theta = Vector::Zero(d);
    for (std::size_t i = 0; i < free.size(); ++i) theta[free[i]] = x[static_cast<Index>(i)];
    return theta;
}

using LogIntegrand = std::function<double(const Vector&)>;

/// Integral of exp(f) over the box [lo, hi] (t = lo.size() free components).
Evidence integrate_free(const LogIntegrand& f, const Vector& lo, const Vector& hi, const IntegrationSettings& s,
                        const std::string& label) {
    const Index t = lo.size();
    if (t == 0) return {f(Vector()), 0.0};
    if ((hi.array() <= lo.array()).any()) return {kNegInf, 0.0};

    if (t <= 2) {
        QuadratureResult r;
        if (t == 1) {
            Vector x(1);
            r = integrate_exp([&](double u) { x[0] = u; return f(x); }, lo[0], hi[0], s.quadrature);
        } else {
            Vector x(2);
            r = integrate_exp_2d([&](double u, double v) { x[0] = u; x[1] = v; return f(x); }, lo[0], hi[0],
                                 lo[1], hi[1], s.quadrature);
        }
        if (!r.converged) {
            std::ostringstream msg;
            msg << "integration for " << label << " did not converge (achieved relative error " << r.rel_error
                << ", requested " << s.quadrature.rel_tol << ")";
            throw NumericalError(msg.str());
        }
        return {r.log_value, r.rel_error};
    }

    if (s.mc_samples < 2) throw Error("mc_samples must be >= 2");
    std::mt19937_64 rng(s.seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<double> values(static_cast<std::size_t>(s.mc_samples));
    Vector x(t);
    double top = kNegInf;
    for (auto& v : values) {
        for (Index j = 0; j < t; ++j) x[j] = lo[j] + (hi[j] - lo[j]) * unif(rng);
        v = f(x);
        top = std::max(top, v);
    }
    if (top == kNegInf) return {kNegInf, 0.0};
    double sum = 0.0;
    double sum_sq = 0.0;
    for (double v : values) {
        const double e = std::exp(v - top);
        sum += e;
        sum_sq += e * e;
    }
    const double N = static_cast<double>(values.size());
    const double mean = sum / N;
    const double var = std::max(0.0, (sum_sq / N - mean * mean)) * N / (N - 1.0);
    const double log_volume = (hi - lo).array().log().sum();
    return {top + std::log(mean) + log_volume, std::sqrt(var / N) / mean};
}

/// m-bar(theta) for all p moments, computed once per call site.
std::function<Vector(const Vector&)> moment_mean_fn(const MomentModel& model, const Dataset& data) {
    if (model.is_affine()) {
        auto terms = average_affine_terms(model, data);
        return [terms = std::move(terms)](const Vector& theta) { return terms(theta); };
    }
    model.bind(data);
    return [&model, &data](const Vector& theta) { return sample_moment_mean(model, data, theta); };
}

} // namespace

void Combination::validate(Index p, Index k) const {
    if (moments.empty()) throw Error("a combination needs at least one moment");
    auto check = [](const std::vector<int>& v, Index limit, const char* what) {
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (v[i] < 0 || v[i] >= limit) throw DimensionError(std::string(what) + " index out of range");
            if (i > 0 && v[i] <= v[i - 1]) throw Error(std::string(what) + " indices must be sorted and distinct");
        }
    };
    check(moments, p, "moment");
    check(free, k, "parameter");
}

std::string index_list(const std::vector<int>& idx) {
    std::string s;
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (i) s += ' ';
        s += std::to_string(idx[i] + 1);
    }
    return s;
}

std::string to_string(const Combination& c) {
    auto braced = [](const std::vector<int>& v) {
        std::string s = "{";
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (i) s += ',';
            s += std::to_string(v[i] + 1);
        }
        return s + "}";
    };
    return "M" + braced(c.moments) + "|T" + braced(c.free);
}

std::vector<Combination> enumerate_candidates(Index p, Index k, const CandidateConstraints& constraints) {
    if (p < 1 || k < 1) throw Error("enumerate_candidates needs p >= 1 and k >= 1");
    if (p > 20 || k > 20) throw Error("too many moments or parameters to enumerate");
    auto subset = [](unsigned mask, Index size) {
        std::vector<int> out;
        for (int j = 0; j < size; ++j) {
            if (mask & (1u << j)) out.push_back(j);
        }
        return out;
    };
    auto allowed = [](const std::vector<std::vector<int>>& list, const std::vector<int>& v) {
        if (list.empty()) return true;
        return std::any_of(list.begin(), list.end(), [&](std::vector<int> a) {
            std::sort(a.begin(), a.end());
            return a == v;
        });
    };
    std::vector<Combination> out;
    for (unsigned ms = 1; ms < (1u << p); ++ms) {
        auto moments = subset(ms, p);
        if (!allowed(constraints.moment_subsets, moments)) continue;
        for (unsigned fs = 0; fs < (1u << k); ++fs) {
            auto free = subset(fs, k);
            if (!allowed(constraints.free_masks, free)) continue;
            out.push_back({moments, free});
        }
    }
    if (out.empty()) throw Error("no candidate combinations remain after applying the constraints");
    std::sort(out.begin(), out.end());
    return out;
}

bool true_combination_oracle(const Combination& comb, const AffineTerms& population, const ThetaBox& box,
                             double spacing) {
    const Index p = population.A.rows();
    const Index d = population.A.cols();
    if (!(spacing > 0.0)) throw Error("grid spacing must be positive");
    if (box.dim() != d || population.b.size() != p) throw DimensionError("population terms do not match the box");
    comb.validate(p, d);

    const Index t = comb.t();
    Vector tol(comb.m());
    for (Index r = 0; r < comb.m(); ++r) {
        double lip = 0.0;
        for (int j : comb.free) lip += std::abs(population.A(comb.moments[static_cast<std::size_t>(r)], j));
        tol[r] = lip * spacing;
    }
    std::vector<Index> steps(static_cast<std::size_t>(t));
    for (Index i = 0; i < t; ++i) {
        const int j = comb.free[static_cast<std::size_t>(i)];
        steps[static_cast<std::size_t>(i)] =
            std::max<Index>(1, static_cast<Index>(std::ceil((box.upper()[j] - box.lower()[j]) / spacing)));
    }
    std::vector<Index> counter(static_cast<std::size_t>(t), 0);
    Vector theta = Vector::Zero(d);
    while (true) {
        for (Index i = 0; i < t; ++i) {
            const int j = comb.free[static_cast<std::size_t>(i)];
            const double frac = static_cast<double>(counter[static_cast<std::size_t>(i)]) /
                                static_cast<double>(steps[static_cast<std::size_t>(i)]);
            theta[j] = box.lower()[j] + frac * (box.upper()[j] - box.lower()[j]);
        }
        const Vector em = population(theta);
        bool ok = true;
        for (Index r = 0; r < comb.m() && ok; ++r) ok = em[comb.moments[static_cast<std::size_t>(r)]] >= -tol[r];
        if (ok) return true;
        Index i = 0;
        for (; i < t; ++i) {
            auto& c = counter[static_cast<std::size_t>(i)];
            if (++c <= steps[static_cast<std::size_t>(i)]) break;
            c = 0;
        }
        if (i == t) return false;
    }
}

double candidate_prior_a1(const Combination& comb, Index n, double alpha) {
    if (!(alpha > 0.0)) throw Error("alpha must be positive");
    if (n < 2) throw Error("candidate prior needs n >= 2");
    return alpha * static_cast<double>(comb.m() - comb.t()) * std::log(static_cast<double>(n));
}

void check_polynomial_candidate_prior(const CandidateLogPrior& prior, Index p, Index k) {
    const auto candidates = enumerate_candidates(p, k);
    constexpr double kMaxDegree = 100.0;
    for (Index n : {Index{10}, Index{1000}, Index{1000000}}) {
        const double bound = kMaxDegree * std::log(static_cast<double>(n));
        for (const auto& c : candidates) {
            const double v = prior(c, n);
            if (std::isnan(v) || std::abs(v) > bound) {
                throw Error("candidate prior for " + to_string(c) + " grows faster than a polynomial in n; "
                            "exponential candidate priors are not supported");
            }
        }
    }
}

Evidence log_integrated_likelihood_a1(const Combination& comb, const MomentModel& model, const Dataset& data,
                                      const Hyperparameters& hyper, const ThetaPrior& theta_prior,
                                      const IntegrationSettings& settings) {
    if (hyper.p() != model.p()) throw DimensionError("hyperparameters do not match the model");
    if (theta_prior.dim() != model.d()) throw DimensionError("theta prior does not match the model");
    comb.validate(model.p(), model.d());

    const auto mbar = moment_mean_fn(model, data);
    const Hyperparameters sub = hyper.subset(comb.moments);
    const double n = static_cast<double>(data.n());
    const Index d = model.d();
    std::optional<ThetaPrior> marginal;
    if (!comb.free.empty()) marginal = theta_prior.marginal(comb.free);

    auto log_f = [&](const Vector& x) {
        const double lp = marginal ? marginal->log_density(x) : 0.0;
        if (lp == kNegInf) return kNegInf;
        const Vector m = take(mbar(embed(x, comb.free, d)), comb.moments);
        return lp + log_limited_likelihood_from_moments(m, sub, n, settings.orthant);
    };
    if (!marginal) return integrate_free(log_f, Vector(), Vector(), settings, to_string(comb));
    return integrate_free(log_f, marginal->box().lower(), marginal->box().upper(), settings, to_string(comb));
}

ApproachTwoBlocks assemble_a2_blocks(const Combination& comb, const Hyperparameters& hyper, Index n,
                                     double sigma_n2) {
    if (!(sigma_n2 > 0.0) || !std::isfinite(sigma_n2)) throw Error("sigma_n^2 must be positive");
    if (n < 1) throw Error("n must be >= 1");
    const Index p = hyper.p();
    if (comb.moments.empty()) throw Error("a combination needs at least one moment");
    for (int j : comb.moments) {
        if (j < 0 || j >= p) throw DimensionError("moment index out of range");
    }

    ApproachTwoBlocks blk;
    blk.selected = comb.moments;
    blk.unselected = complement(comb.moments, p);
    blk.sigma_n2 = sigma_n2;
    blk.n = n;
    const Index m = static_cast<Index>(blk.selected.size());
    const Index r = p - m;
    std::vector<int> order = blk.selected;
    order.insert(order.end(), blk.unselected.begin(), blk.unselected.end());

    const double nd = static_cast<double>(n);
    blk.S = take(hyper.V(), order, order) / nd;
    blk.S.bottomRightCorner(r, r).diagonal().array() += sigma_n2;

    Eigen::LLT<Matrix> llt(blk.S);
    if (llt.info() != Eigen::Success) throw NumericalError("S_n is not positive definite");
    const Matrix inv = llt.solve(Matrix::Identity(p, p)) / nd;
    blk.sigma1 = inv.topLeftCorner(m, m);
    blk.sigma3 = inv.topRightCorner(m, r);
    blk.sigma2 = inv.bottomRightCorner(r, r);
    blk.V2 = take(hyper.V(), blk.unselected, blk.unselected);
    blk.V2.diagonal().array() += nd * sigma_n2;
    return blk;
}

ApproachTwoLikelihood::ApproachTwoLikelihood(const Combination& comb, const MomentModel& model, const Dataset& data,
                                             const Hyperparameters& hyper, double sigma_n2, OrthantSettings orthant)
    : n_(data.n()), orthant_(orthant) {
    if (!model.is_affine()) throw Error("approach 2 requires an affine moment model");
    if (hyper.p() != model.p()) throw DimensionError("hyperparameters do not match the model");
    comb.validate(model.p(), model.d());
    blocks_ = assemble_a2_blocks(comb, hyper, n_, sigma_n2);

    const double n = static_cast<double>(n_);
    const AffineTerms avg = average_affine_terms(model, data);
    const auto& sel = blocks_.selected;
    const auto& uns = blocks_.unselected;
    const Index m = static_cast<Index>(sel.size());
    const Index r = static_cast<Index>(uns.size());
    const Index d = model.d();

    std::vector<int> cols(static_cast<std::size_t>(d));
    for (Index j = 0; j < d; ++j) cols[static_cast<std::size_t>(j)] = static_cast<int>(j);
    const Matrix A_s = take(avg.A, sel, cols);
    const Vector b_s = take(avg.b, sel);
    unsel_A_ = take(avg.A, uns, cols);
    unsel_b_ = take(avg.b, uns);

    const Eigen::LLT<Matrix> s1(blocks_.sigma1);
    if (s1.info() != Eigen::Success) throw NumericalError("sigma_1 is not positive definite");
    const Matrix s1_inv = s1.solve(Matrix::Identity(m, m));
    const Matrix G = s1.solve(blocks_.sigma3);
    shift_A_ = A_s + G * unsel_A_;
    shift_b_ = b_s + G * unsel_b_;

    psi_ = take(hyper.psi(), sel);
    w_cov_ = s1_inv / n;
    w_cov_ = 0.5 * (w_cov_ + w_cov_.transpose());
    w_cov_psi_ = w_cov_ * psi_;

    const_ = psi_.array().log().sum() + 0.5 * psi_.dot(w_cov_psi_);
    if (r > 0) {
        const Matrix cov = blocks_.V2 / n;
        v2_llt_.compute(cov);
        if (v2_llt_.info() != Eigen::Success) throw NumericalError("V_2 is not positive definite");
        const Matrix L = v2_llt_.matrixL();
        const double log_det = 2.0 * L.diagonal().array().log().sum();
        const_ += -0.5 * static_cast<double>(r) * kLog2Pi - 0.5 * log_det;
    }
}

double ApproachTwoLikelihood::operator()(const Vector& theta) const {
    const Vector c = shift_A_ * theta + shift_b_;
    auto q = OrthantQuery::from(c - w_cov_psi_, w_cov_, orthant_);
    const double log_p = log_orthant_probability(q);
    if (log_p == kNegInf) return kNegInf;
    double value = const_ + log_p - psi_.dot(c);
    if (unsel_b_.size() > 0) {
        const Vector b = unsel_A_ * theta + unsel_b_;
        value -= 0.5 * b.dot(v2_llt_.solve(b));
    }
    return value;
}

Evidence log_integrated_likelihood_a2(const Combination& comb, const MomentModel& model, const Dataset& data,
                                      const Hyperparameters& hyper, double sigma_n2,
                                      const std::optional<ThetaBox>& domain, const IntegrationSettings& settings) {
    const ApproachTwoLikelihood lik(comb, model, data, hyper, sigma_n2, settings.orthant);
    const Index d = model.d();
    if (domain && domain->dim() != d) throw DimensionError("integration domain does not match the model");

    const double prior_var = static_cast<double>(data.n()) * sigma_n2;
    const double prior_sd = std::sqrt(prior_var);
    const Index t = comb.t();
    Vector lo(t);
    Vector hi(t);
    for (Index i = 0; i < t; ++i) {
        const int j = comb.free[static_cast<std::size_t>(i)];
        lo[i] = -8.0 * prior_sd;
        hi[i] = 8.0 * prior_sd;
        if (domain) {
            lo[i] = std::max(lo[i], domain->lower()[j]);
            hi[i] = std::min(hi[i], domain->upper()[j]);
        }
    }
    const double log_norm = -0.5 * static_cast<double>(t) * (kLog2Pi + std::log(prior_var));
    auto log_f = [&](const Vector& x) {
        const double ll = lik(embed(x, comb.free, d));
        if (ll == kNegInf) return kNegInf;
        return ll + log_norm - 0.5 * x.squaredNorm() / prior_var;
    };
    return integrate_free(log_f, lo, hi, settings, to_string(comb));
}

double CandidatePosterior::weight_of(const Combination& c) const {
    for (const auto& r : candidates) {
        if (r.comb == c) return r.weight;
    }
    throw Error("combination " + to_string(c) + " is not among the candidates");
}

void normalise_weights(CandidatePosterior& post) {
    if (post.candidates.empty()) throw Error("no candidates to normalise");
    double lse = kNegInf;
    for (const auto& r : post.candidates) {
        if (std::isnan(r.log_evidence) || std::isnan(r.log_prior)) throw NumericalError("NaN candidate evidence");
        lse = log_add_exp(lse, r.log_evidence + r.log_prior);
    }
    if (lse == kNegInf) throw NumericalError("every candidate has -inf evidence");
    for (auto& r : post.candidates) r.weight = std::exp(r.log_evidence + r.log_prior - lse);

    post.argmax = 0;
    for (std::size_t i = 1; i < post.candidates.size(); ++i) {
        const auto& cur = post.candidates[i];
        const auto& best = post.candidates[post.argmax];
        if (cur.weight > best.weight || (cur.weight == best.weight && cur.comb < best.comb)) post.argmax = i;
    }
}

CandidatePosterior mpc_select(const std::vector<Combination>& candidates, const MomentModel& model,
                              const Dataset& data, const Hyperparameters& hyper, const Approach& approach,
                              const IntegrationSettings& settings, const CandidateLogPrior& custom_prior) {
    if (candidates.empty()) throw Error("candidate list is empty");
    CandidatePosterior post;
    post.candidates.reserve(candidates.size());
    if (custom_prior) check_polynomial_candidate_prior(custom_prior, model.p(), model.d());
    if (const auto* a1 = std::get_if<ApproachOne>(&approach)) {
        post.approach = "A1";
        post.param = a1->alpha;
        for (const auto& c : candidates) {
            const auto ev = log_integrated_likelihood_a1(c, model, data, hyper, a1->theta_prior, settings);
            const double lp = custom_prior ? custom_prior(c, data.n()) : candidate_prior_a1(c, data.n(), a1->alpha);
            post.candidates.push_back({c, ev.log_value, lp, 0.0, ev.rel_error});
        }
    } else {
        const auto& a2 = std::get<ApproachTwo>(approach);
        post.approach = "A2";
        post.param = a2.sigma_n2;
        for (const auto& c : candidates) {
            const auto ev = log_integrated_likelihood_a2(c, model, data, hyper, a2.sigma_n2, a2.domain, settings);
            const double lp = custom_prior ? custom_prior(c, data.n()) : 0.0;
            post.candidates.push_back({c, ev.log_value, lp, 0.0, ev.rel_error});
        }
    }
    normalise_weights(post);
    return post;
}

} // namespace mib
