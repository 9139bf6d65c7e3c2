#include "mib/mcmc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace mib {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double checked(double v) {
    if (std::isnan(v) || v == std::numeric_limits<double>::infinity()) {
        throw NumericalError("target returned a non-finite value other than -inf");
    }
    return v;
}

} // namespace

Chain metropolis(const LogDensity& target, const Vector& init, const ProposalSpec& proposal, Index B,
                 Index burn_in, std::uint64_t seed) {
    const Index d = init.size();
    if (d < 1) throw DimensionError("initial state must have dimension >= 1");
    if (proposal.sd.size() != d) throw DimensionError("proposal sd length does not match the state");
    if ((proposal.sd.array() <= 0.0).any() || !proposal.sd.allFinite()) {
        throw Error("proposal standard deviations must be positive");
    }
    if (B < 1) throw Error("chain length B must be >= 1");
    if (burn_in < 0) throw Error("burn-in must be non-negative");

    Vector state = init;
    double current = checked(target(state));
    if (current == kNegInf) throw Error("initial state has zero target density");

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> step(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    Chain chain;
    chain.draws.resize(B, d);
    chain.log_post.resize(B);
    chain.seed = seed;
    chain.burn_in = burn_in;

    long accepted = 0;
    const Index total = burn_in + B;
    Vector cand(d);
    for (Index it = 0; it < total; ++it) {
        for (Index j = 0; j < d; ++j) cand[j] = state[j] + proposal.sd[j] * step(rng);
        const double value = checked(target(cand));
        // The uniform is drawn every step so the stream does not depend on
        // which proposals hit -inf.
        const double u = unif(rng);
        if (value != kNegInf && std::log(u) < value - current) {
            state = cand;
            current = value;
            ++accepted;
        }
        if (it >= burn_in) {
            chain.draws.row(it - burn_in) = state.transpose();
            chain.log_post[it - burn_in] = current;
        }
    }
    chain.acceptance_rate = static_cast<double>(accepted) / static_cast<double>(total);
    return chain;
}

double empirical_quantile(std::vector<double> values, double q) {
    if (values.empty()) throw Error("quantile of an empty sample");
    if (!(q >= 0.0 && q <= 1.0)) throw Error("quantile level must lie in [0, 1]");
    std::sort(values.begin(), values.end());
    const double B = static_cast<double>(values.size());
    // Smallest k with k / B >= q; the slack absorbs rounding in q = 1 - 1/B.
    auto k = static_cast<long>(std::ceil(q * B - 1e-9));
    k = std::clamp(k, 1L, static_cast<long>(values.size()));
    return values[static_cast<std::size_t>(k - 1)];
}

double chain_quantile(const Chain& chain, const ScalarMap& g, double q) {
    if (chain.size() == 0) throw Error("quantile of an empty chain");
    std::vector<double> values(static_cast<std::size_t>(chain.size()));
    for (Index b = 0; b < chain.size(); ++b) values[static_cast<std::size_t>(b)] = g(chain.draws.row(b).transpose());
    return empirical_quantile(std::move(values), q);
}

ScalarMap coordinate(Index j) {
    return [j](const Vector& theta) { return theta[j]; };
}

} // namespace mib
