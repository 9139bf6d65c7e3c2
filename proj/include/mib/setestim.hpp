#pragma once

#include "mib/core.hpp"
#include "mib/mcmc.hpp"

#include <optional>
#include <string>
#include <vector>

namespace mib {

/// [F_g^{-1}(pi_n), F_g^{-1}(1 - pi_n)] from the empirical posterior CDF of g.
struct IntervalEstimate {
    double lower = 0.0;
    double upper = 0.0;
    double pi_n = 0.0;
    std::string g = "theta";
};

IntervalEstimate quantile_set_estimate(const Chain& chain, const ScalarMap& g, double pi_n,
                                       std::string g_description = "theta");

inline double default_pi(Index n) { return 1.0 / static_cast<double>(n); }

enum class EpsilonKind { sqrt_n, log_n, loglog_n };

/// sqrt(n), ln n or ln ln n. Requires n >= 3.
double epsilon_schedule(Index n, EpsilonKind kind);
std::string to_string(EpsilonKind kind);
EpsilonKind parse_epsilon_kind(const std::string& s);

struct MaximizeOptions {
    double ftol = 1e-11;            ///< spread of simplex values at convergence
    int max_evals_per_start = 5000;
};

struct MaximizeResult {
    Vector theta;
    double value = 0.0;
};

/// Multi-start Nelder-Mead ascent restricted to the box (points outside the
/// box count as -inf). Starts with -inf target are skipped; the best local
/// maximum found is returned.
MaximizeResult map_maximize(const LogDensity& target, const ThetaBox& box, const std::vector<Vector>& starts,
                            const MaximizeOptions& opts = {});

/// `count` low-discrepancy (Halton) points scaled into the box, plus its centre.
std::vector<Vector> default_starts(const ThetaBox& box, int count = 8);

struct GridSpec {
    double spacing = 0.02;
};

/// {theta : max ln p - ln p(theta) <= epsilon_n}, represented by grid points
/// (d <= 2) or by chain draws (any d).
struct LevelSetRegion {
    double epsilon_n = 0.0;
    double max_log_post = 0.0;
    Vector argmax_theta;
    double threshold = 0.0;     ///< max_log_post - epsilon_n
    Matrix points;              ///< accepted points, one per row
    Vector values;              ///< target at each accepted point
    std::optional<Vector> spacing; ///< grid spacing per axis; empty for chain-based regions
    Vector hull_lower;          ///< per-axis min over accepted points
    Vector hull_upper;          ///< per-axis max over accepted points
};

LevelSetRegion level_set_region(const LogDensity& target, const ThetaBox& box, double epsilon_n,
                                const GridSpec& grid, const std::vector<Vector>& starts = {});

LevelSetRegion level_set_region(const LogDensity& target, const ThetaBox& box, double epsilon_n,
                                const Chain& chain, const std::vector<Vector>& starts = {});

/// Exact Euclidean Hausdorff distance between finite point sets (rows).
double hausdorff(const Matrix& a, const Matrix& b);

} // namespace mib
