#include "mib/setestim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace mib {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kInf = std::numeric_limits<double>::infinity();

double radical_inverse(int base, int index) {
    double f = 1.0;
    double r = 0.0;
    while (index > 0) {
        f /= base;
        r += f * (index % base);
        index /= base;
    }
    return r;
}

constexpr int kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53};

struct NelderMead {
    const LogDensity& target;
    const ThetaBox& box;
    const MaximizeOptions& opts;
    int evals = 0;

    // Minimises the negated target.
    double cost(const Vector& x) {
        ++evals;
        if (!box.contains(x)) return kInf;
        const double v = target(x);
        if (std::isnan(v)) throw NumericalError("target returned NaN during maximisation");
        return -v;
    }

    std::pair<Vector, double> run(const Vector& start, double start_cost) {
        const Index d = start.size();
        std::vector<Vector> simplex(static_cast<std::size_t>(d + 1), start);
        std::vector<double> f(static_cast<std::size_t>(d + 1), start_cost);
        const Vector width = box.upper() - box.lower();
        for (Index j = 0; j < d; ++j) {
            Vector v = start;
            double h = 0.05 * width[j];
            if (v[j] + h > box.upper()[j]) h = -h;
            v[j] += h;
            simplex[static_cast<std::size_t>(j + 1)] = v;
            f[static_cast<std::size_t>(j + 1)] = cost(v);
        }
        std::vector<std::size_t> order(simplex.size());
        while (evals < opts.max_evals_per_start) {
            std::iota(order.begin(), order.end(), 0);
            std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return f[a] < f[b]; });
            const std::size_t best = order.front();
            const std::size_t worst = order.back();
            const std::size_t second = order[order.size() - 2];

            double size = 0.0;
            for (const auto& v : simplex) size = std::max(size, (v - simplex[best]).cwiseAbs().maxCoeff());
            const bool flat = std::isfinite(f[worst]) && std::abs(f[worst] - f[best]) <= opts.ftol;
            if (flat || size <= 1e-12 * (1.0 + width.maxCoeff())) break;

            Vector centroid = Vector::Zero(d);
            for (std::size_t k = 0; k < simplex.size(); ++k) {
                if (k != worst) centroid += simplex[k];
            }
            centroid /= static_cast<double>(d);

            const Vector xr = centroid + (centroid - simplex[worst]);
            const double fr = cost(xr);
            if (fr < f[best]) {
                const Vector xe = centroid + 2.0 * (centroid - simplex[worst]);
                const double fe = cost(xe);
                if (fe < fr) {
                    simplex[worst] = xe;
                    f[worst] = fe;
                } else {
                    simplex[worst] = xr;
                    f[worst] = fr;
                }
                continue;
            }
            if (fr < f[second]) {
                simplex[worst] = xr;
                f[worst] = fr;
                continue;
            }
            const bool outside = fr < f[worst];
            const Vector xc = outside ? Vector(centroid + 0.5 * (xr - centroid))
                                      : Vector(centroid + 0.5 * (simplex[worst] - centroid));
            const double fc = cost(xc);
            if (fc < (outside ? fr : f[worst])) {
                simplex[worst] = xc;
                f[worst] = fc;
                continue;
            }
            for (std::size_t k = 0; k < simplex.size(); ++k) {
                if (k == best) continue;
                simplex[k] = simplex[best] + 0.5 * (simplex[k] - simplex[best]);
                f[k] = cost(simplex[k]);
            }
        }
        const auto it = std::min_element(f.begin(), f.end());
        return {simplex[static_cast<std::size_t>(it - f.begin())], *it};
    }
};

LevelSetRegion finish_region(std::vector<Vector> pts, std::vector<double> vals, double eps, double max_value,
                             Vector argmax, Index d) {
    LevelSetRegion region;
    region.epsilon_n = eps;
    region.max_log_post = max_value;
    region.argmax_theta = std::move(argmax);
    region.threshold = max_value - eps;
    if (pts.empty()) throw Error("level set is empty; epsilon_n is below the optimiser tolerance");
    region.points.resize(static_cast<Index>(pts.size()), d);
    region.values.resize(static_cast<Index>(pts.size()));
    for (std::size_t k = 0; k < pts.size(); ++k) {
        region.points.row(static_cast<Index>(k)) = pts[k].transpose();
        region.values[static_cast<Index>(k)] = vals[k];
    }
    region.hull_lower = region.points.colwise().minCoeff().transpose();
    region.hull_upper = region.points.colwise().maxCoeff().transpose();
    return region;
}

} // namespace

IntervalEstimate quantile_set_estimate(const Chain& chain, const ScalarMap& g, double pi_n,
                                       std::string g_description) {
    if (!(pi_n > 0.0 && pi_n < 0.5)) throw Error("pi_n must lie in (0, 0.5)");
    IntervalEstimate est;
    est.lower = chain_quantile(chain, g, pi_n);
    est.upper = chain_quantile(chain, g, 1.0 - pi_n);
    est.pi_n = pi_n;
    est.g = std::move(g_description);
    return est;
}

double epsilon_schedule(Index n, EpsilonKind kind) {
    if (n < 3) throw Error("epsilon schedule needs n >= 3");
    const double x = static_cast<double>(n);
    switch (kind) {
    case EpsilonKind::sqrt_n: return std::sqrt(x);
    case EpsilonKind::log_n: return std::log(x);
    case EpsilonKind::loglog_n: return std::log(std::log(x));
    }
    throw Error("unknown epsilon kind");
}

std::string to_string(EpsilonKind kind) {
    switch (kind) {
    case EpsilonKind::sqrt_n: return "sqrt-n";
    case EpsilonKind::log_n: return "log-n";
    case EpsilonKind::loglog_n: return "loglog-n";
    }
    return "?";
}

EpsilonKind parse_epsilon_kind(const std::string& s) {
    if (s == "sqrt-n") return EpsilonKind::sqrt_n;
    if (s == "log-n") return EpsilonKind::log_n;
    if (s == "loglog-n") return EpsilonKind::loglog_n;
    throw Error("unknown epsilon kind '" + s + "' (expected sqrt-n, log-n or loglog-n)");
}

std::vector<Vector> default_starts(const ThetaBox& box, int count) {
    const Index d = box.dim();
    std::vector<Vector> starts;
    starts.push_back(box.center());
    for (int i = 1; i <= count; ++i) {
        Vector u(d);
        for (Index j = 0; j < d; ++j) {
            const int base = kPrimes[static_cast<std::size_t>(j) % std::size(kPrimes)];
            u[j] = radical_inverse(base, i);
        }
        starts.push_back(box.lower() + u.cwiseProduct(box.upper() - box.lower()));
    }
    return starts;
}

MaximizeResult map_maximize(const LogDensity& target, const ThetaBox& box, const std::vector<Vector>& starts,
                            const MaximizeOptions& opts) {
    MaximizeResult best{Vector(), kNegInf};
    bool any = false;
    for (const auto& s0 : starts) {
        if (s0.size() != box.dim()) throw DimensionError("start point dimension does not match the box");
        const Vector s = box.clamp(s0);
        const double v0 = target(s);
        if (std::isnan(v0)) throw NumericalError("target returned NaN during maximisation");
        if (v0 == kNegInf) continue;
        any = true;
        NelderMead nm{target, box, opts};
        auto [x, fx] = nm.run(s, -v0);
        // One restart from the converged point guards against a collapsed simplex.
        NelderMead again{target, box, opts};
        auto [x2, fx2] = again.run(x, fx);
        if (-fx2 > best.value || best.theta.size() == 0) best = {x2, -fx2};
    }
    if (!any) throw Error("every start point has -inf target");
    return best;
}

LevelSetRegion level_set_region(const LogDensity& target, const ThetaBox& box, double epsilon_n,
                                const GridSpec& grid, const std::vector<Vector>& starts) {
    if (!(epsilon_n > 0.0)) throw Error("epsilon_n must be positive");
    if (!(grid.spacing > 0.0)) throw Error("grid spacing must be positive");
    const Index d = box.dim();
    if (d > 2) throw Error("grid level sets support d <= 2; pass a chain for higher dimensions");

    std::vector<Index> steps(static_cast<std::size_t>(d));
    Vector spacing(d);
    for (Index j = 0; j < d; ++j) {
        const double w = box.upper()[j] - box.lower()[j];
        steps[static_cast<std::size_t>(j)] = std::max<Index>(1, static_cast<Index>(std::llround(w / grid.spacing)));
        spacing[j] = w / static_cast<double>(steps[static_cast<std::size_t>(j)]);
    }
    auto node = [&](Index j, Index i) {
        return i == steps[static_cast<std::size_t>(j)] ? box.upper()[j]
                                                       : box.lower()[j] + static_cast<double>(i) * spacing[j];
    };

    const Index nx = steps[0] + 1;
    const Index ny = d == 2 ? steps[1] + 1 : 1;
    std::vector<double> values(static_cast<std::size_t>(nx * ny));
    Vector theta(d);
    double grid_max = kNegInf;
    Vector grid_arg;
    for (Index ix = 0; ix < nx; ++ix) {
        theta[0] = node(0, ix);
        for (Index iy = 0; iy < ny; ++iy) {
            if (d == 2) theta[1] = node(1, iy);
            const double v = target(theta);
            if (std::isnan(v)) throw NumericalError("target returned NaN on the grid");
            values[static_cast<std::size_t>(ix * ny + iy)] = v;
            if (v > grid_max) {
                grid_max = v;
                grid_arg = theta;
            }
        }
    }
    if (grid_max == kNegInf) throw Error("target is -inf on the whole grid");

    std::vector<Vector> all_starts = starts.empty() ? default_starts(box) : starts;
    all_starts.push_back(grid_arg);
    auto opt = map_maximize(target, box, all_starts);
    if (grid_max > opt.value) opt = {grid_arg, grid_max};

    const double threshold = opt.value - epsilon_n;
    std::vector<Vector> pts;
    std::vector<double> vals;
    for (Index ix = 0; ix < nx; ++ix) {
        for (Index iy = 0; iy < ny; ++iy) {
            const double v = values[static_cast<std::size_t>(ix * ny + iy)];
            if (v >= threshold) {
                Vector p(d);
                p[0] = node(0, ix);
                if (d == 2) p[1] = node(1, iy);
                pts.push_back(std::move(p));
                vals.push_back(v);
            }
        }
    }
    auto region = finish_region(std::move(pts), std::move(vals), epsilon_n, opt.value, opt.theta, d);
    region.spacing = spacing;
    return region;
}

LevelSetRegion level_set_region(const LogDensity& target, const ThetaBox& box, double epsilon_n,
                                const Chain& chain, const std::vector<Vector>& starts) {
    if (!(epsilon_n > 0.0)) throw Error("epsilon_n must be positive");
    if (chain.size() == 0) throw Error("level set from an empty chain");
    if (chain.dim() != box.dim()) throw DimensionError("chain dimension does not match the box");

    std::vector<Vector> all_starts = starts.empty() ? default_starts(box) : starts;
    Index best_draw = 0;
    chain.log_post.maxCoeff(&best_draw);
    all_starts.push_back(chain.draws.row(best_draw).transpose());
    const auto opt = map_maximize(target, box, all_starts);

    std::vector<Vector> pts;
    std::vector<double> vals;
    double max_value = opt.value;
    Vector arg = opt.theta;
    std::vector<double> draw_values(static_cast<std::size_t>(chain.size()));
    for (Index b = 0; b < chain.size(); ++b) {
        const double v = target(chain.draws.row(b).transpose());
        draw_values[static_cast<std::size_t>(b)] = v;
        if (v > max_value) {
            max_value = v;
            arg = chain.draws.row(b).transpose();
        }
    }
    const double threshold = max_value - epsilon_n;
    for (Index b = 0; b < chain.size(); ++b) {
        if (b > 0 && chain.draws.row(b) == chain.draws.row(b - 1)) continue;
        const double v = draw_values[static_cast<std::size_t>(b)];
        if (v >= threshold) {
            pts.push_back(chain.draws.row(b).transpose());
            vals.push_back(v);
        }
    }
    return finish_region(std::move(pts), std::move(vals), epsilon_n, max_value, std::move(arg), box.dim());
}

double hausdorff(const Matrix& a, const Matrix& b) {
    if (a.rows() == 0 || b.rows() == 0) throw Error("Hausdorff distance of an empty set");
    if (a.cols() != b.cols()) throw DimensionError("point sets differ in dimension");
    auto directed = [](const Matrix& x, const Matrix& y) {
        double worst = 0.0;
        for (Index i = 0; i < x.rows(); ++i) {
            double nearest = kInf;
            for (Index j = 0; j < y.rows(); ++j) {
                nearest = std::min(nearest, (x.row(i) - y.row(j)).squaredNorm());
            }
            worst = std::max(worst, nearest);
        }
        return std::sqrt(worst);
    };
    return std::max(directed(a, b), directed(b, a));
}

} // namespace mib
