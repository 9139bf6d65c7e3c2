#include "mib/experiments.hpp"
#include "mib/likelihood.hpp"
#include "mib/mcmc.hpp"
#include "mib/setestim.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <set>

using namespace mib;

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

Vector v1(double x) { return Vector::Constant(1, x); }

struct IntervalPosterior {
    LogLikelihoodContext ctx;
    ThetaPrior prior;

    IntervalPosterior(Index n, std::uint64_t seed, Vector psi = (Vector(2) << 0.1, 0.5).finished())
        : ctx(example_5_1_model(), gen_example_5_1(n, seed), Hyperparameters::identity(std::move(psi))),
          prior(ThetaPrior::flat(ThetaBox(v1(-2.0), v1(7.0)))) {}

    LogDensity target() const {
        return [this](const Vector& t) { return log_posterior_unnorm(ctx, prior, t); };
    }
    const ThetaBox& box() const { return prior.box(); }
};

Chain interval_chain(const IntervalPosterior& post, std::uint64_t seed) {
    return metropolis(post.target(), v1(1.0), ProposalSpec::isotropic(1, std::sqrt(0.5)), 5000, 500, seed);
}

std::set<std::pair<long, long>> grid_keys(const LevelSetRegion& r, double h) {
    std::set<std::pair<long, long>> keys;
    for (Index i = 0; i < r.points.rows(); ++i) {
        const long a = std::lround(r.points(i, 0) / h);
        const long b = r.points.cols() > 1 ? std::lround(r.points(i, 1) / h) : 0;
        keys.insert({a, b});
    }
    return keys;
}

Matrix pair_points(double a, double b) {
    Matrix m(2, 1);
    m << a, b;
    return m;
}

} // namespace

TEST_CASE("epsilon schedules") {
    CHECK(epsilon_schedule(5000, EpsilonKind::loglog_n) == doctest::Approx(2.1424).epsilon(1e-4));
    CHECK(epsilon_schedule(5000, EpsilonKind::sqrt_n) == doctest::Approx(70.711).epsilon(1e-5));
    CHECK(epsilon_schedule(1000, EpsilonKind::log_n) == doctest::Approx(6.9078).epsilon(1e-5));
    CHECK_THROWS(epsilon_schedule(2, EpsilonKind::loglog_n));
    for (auto k : {EpsilonKind::sqrt_n, EpsilonKind::log_n, EpsilonKind::loglog_n}) {
        CHECK(parse_epsilon_kind(to_string(k)) == k);
    }
    CHECK_THROWS(parse_epsilon_kind("cube-n"));
}

TEST_CASE("quantile interval of a degenerate chain") {
    Chain c;
    c.draws = Matrix::Constant(50, 1, 1.25);
    c.log_post = Vector::Zero(50);
    const auto est = quantile_set_estimate(c, coordinate(0), 0.01);
    CHECK(est.lower == 1.25);
    CHECK(est.upper == 1.25);
    CHECK_THROWS(quantile_set_estimate(c, coordinate(0), 0.5));
    CHECK_THROWS(quantile_set_estimate(c, coordinate(0), 0.0));
}

TEST_CASE("quantile intervals of the interval-mean posterior") {
    const IntervalPosterior post(5000, 101);
    const auto chain = interval_chain(post, 202);
    const auto est = quantile_set_estimate(chain, coordinate(0), default_pi(5000));
    CHECK(std::abs(est.lower - -0.0063) <= 0.10);
    CHECK(std::abs(est.upper - 4.9927) <= 0.10);

    const auto slow = quantile_set_estimate(chain, coordinate(0), 1.0 / std::log(5000.0));
    CHECK(slow.lower > 0.0);
    CHECK(slow.upper < 5.0);
    CHECK(slow.upper - slow.lower < 4.0);
}

TEST_CASE("quantile intervals nest in pi") {
    const IntervalPosterior post(1000, 7);
    const auto chain = interval_chain(post, 8);
    double prev_lo = -1e300, prev_hi = 1e300;
    for (double pi : {0.0005, 0.001, 0.01, 0.05, 0.1, 0.2, 0.4}) {
        const auto est = quantile_set_estimate(chain, coordinate(0), pi);
        CHECK(est.lower >= prev_lo);
        CHECK(est.upper <= prev_hi);
        CHECK(est.lower <= est.upper);
        prev_lo = est.lower;
        prev_hi = est.upper;
    }
}

TEST_CASE("map_maximize on a quadratic") {
    const ThetaBox box(v1(0.0), v1(5.0));
    const auto r = map_maximize([](const Vector& t) { return -(t[0] - 2.0) * (t[0] - 2.0); }, box, {v1(0.5), v1(4.5)});
    CHECK(std::abs(r.theta[0] - 2.0) < 1e-6);
    CHECK(box.contains(r.theta));

    const ThetaBox box2(Vector::Constant(2, -3.0), Vector::Constant(2, 3.0));
    const auto q = map_maximize(
        [](const Vector& t) { return -std::pow(t[0] - 1.0, 2) - 3.0 * std::pow(t[1] + 0.5, 2) - 0.5 * t[0] * t[1]; },
        box2, default_starts(box2));
    // stationary point of the quadratic
    Matrix H(2, 2);
    H << 2.0, 0.5, 0.5, 6.0;
    const Vector g = (Vector(2) << 2.0, -3.0).finished();
    const Vector star = H.ldlt().solve(g);
    CHECK((q.theta - star).norm() < 1e-5);
}

TEST_CASE("map_maximize with -inf starts") {
    const ThetaBox box(v1(0.0), v1(5.0));
    const auto bad = [](const Vector& t) { return t[0] > 1.0 && t[0] < 4.0 ? -t[0] : kNegInf; };
    CHECK_THROWS(map_maximize(bad, box, {v1(0.5), v1(4.5)}));
    const auto r = map_maximize(bad, box, {v1(0.5), v1(2.0)});
    CHECK(r.value == doctest::Approx(-1.0).epsilon(1e-6));
}

TEST_CASE("map_maximize on the interval-mean posterior matches a grid scan") {
    const IntervalPosterior post(5000, 3);
    const auto target = post.target();
    double grid_max = kNegInf;
    for (double t = -2.0; t <= 7.0 + 1e-12; t += 1e-3) grid_max = std::max(grid_max, target(v1(t)));
    const auto r = map_maximize(target, post.box(), default_starts(post.box()));
    CHECK(r.value >= grid_max - 1e-8);
    CHECK(std::abs(r.value - grid_max) < 1e-4);
    CHECK(post.box().contains(r.theta));
}

TEST_CASE("equal rates give a flat plateau whose midpoint is near-maximal") {
    const IntervalPosterior post(5000, 3, (Vector(2) << 0.3, 0.3).finished());
    const auto target = post.target();
    const Dataset& d = post.ctx.data();
    const double mid = 0.5 * (d.column("y1").mean() + d.column("y2").mean());
    const auto r = map_maximize(target, post.box(), default_starts(post.box()));
    CHECK(std::abs(r.value - target(v1(mid))) < 1e-4);
}

TEST_CASE("level set of a paraboloid is a disk") {
    const ThetaBox box(Vector::Constant(2, -1.0), Vector::Constant(2, 1.0));
    const auto target = [](const Vector& t) { return -t.squaredNorm(); };
    const GridSpec grid{0.02};
    const auto r = level_set_region(target, box, 0.25, grid, default_starts(box));
    CHECK(r.max_log_post == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(r.threshold == doctest::Approx(-0.25));
    for (Index i = 0; i < r.points.rows(); ++i) CHECK(r.points.row(i).squaredNorm() <= 0.25 + 1e-12);
    for (Index j = 0; j < 2; ++j) {
        CHECK(std::abs(r.hull_lower[j] + 0.5) <= grid.spacing + 1e-12);
        CHECK(std::abs(r.hull_upper[j] - 0.5) <= grid.spacing + 1e-12);
    }
    std::size_t inner = 0, ring = 0;
    for (int i = -50; i <= 50; ++i) {
        for (int j = -50; j <= 50; ++j) {
            const double r2 = (0.02 * i) * (0.02 * i) + (0.02 * j) * (0.02 * j);
            inner += r2 < 0.25 - 1e-9;
            ring += std::abs(r2 - 0.25) <= 1e-9;
        }
    }
    const auto accepted = static_cast<std::size_t>(r.points.rows());
    CHECK(accepted >= inner);
    CHECK(accepted <= inner + ring);
    for (Index i = 0; i < r.values.size(); ++i) CHECK(r.values[i] >= r.threshold);
}

TEST_CASE("level-set hull of the interval-mean posterior") {
    const IntervalPosterior post(5000, 41);
    const auto r = level_set_region(post.target(), post.box(), epsilon_schedule(5000, EpsilonKind::loglog_n),
                                    GridSpec{0.001}, default_starts(post.box()));
    CHECK(std::abs(r.hull_lower[0] - -0.0202) <= 0.15);
    CHECK(std::abs(r.hull_upper[0] - 4.9779) <= 0.15);
    CHECK(r.max_log_post >= r.values.maxCoeff() - 1e-12);
}

TEST_CASE("slower cut-offs give wider level sets") {
    const IntervalPosterior post(500, 12);
    const auto wide = level_set_region(post.target(), post.box(), epsilon_schedule(500, EpsilonKind::sqrt_n),
                                       GridSpec{0.001}, default_starts(post.box()));
    const auto tight = level_set_region(post.target(), post.box(), epsilon_schedule(500, EpsilonKind::loglog_n),
                                        GridSpec{0.001}, default_starts(post.box()));
    CHECK(wide.hull_lower[0] < tight.hull_lower[0]);
    CHECK(wide.hull_upper[0] > tight.hull_upper[0]);
}

TEST_CASE("level sets nest in epsilon") {
    const Dataset d = gen_example_5_2(300, 4);
    const LogLikelihoodContext ctx(example_5_2_model(), d,
                                   Hyperparameters::identity((Vector(4) << 0.1, 0.1, 0.5, 0.5).finished()));
    const ThetaBox box((Vector(2) << -12.0, -11.0).finished(), (Vector(2) << 15.0, 14.0).finished());
    const auto prior = ThetaPrior::flat(box);
    const LogDensity target = [&](const Vector& t) { return log_posterior_unnorm(ctx, prior, t); };
    const GridSpec grid{0.1};
    std::set<std::pair<long, long>> prev;
    for (double eps : {0.5, 1.0, 2.0, 5.0}) {
        const auto r = level_set_region(target, box, eps, grid, default_starts(box));
        const auto keys = grid_keys(r, grid.spacing);
        for (const auto& k : prev) CHECK(keys.count(k) == 1);
        CHECK(keys.size() >= prev.size());
        prev = keys;
    }
}

TEST_CASE("adding a constant to the target changes nothing") {
    const IntervalPosterior post(1000, 5);
    const auto target = post.target();
    const LogDensity shifted = [&](const Vector& t) { return target(t) + 123.456; };
    const auto starts = default_starts(post.box());
    const auto a = level_set_region(target, post.box(), 2.0, GridSpec{0.01}, starts);
    const auto b = level_set_region(shifted, post.box(), 2.0, GridSpec{0.01}, starts);
    CHECK(a.points == b.points);
    CHECK(a.hull_lower == b.hull_lower);
    CHECK(a.hull_upper == b.hull_upper);

    const auto ca = metropolis(target, v1(1.0), ProposalSpec::isotropic(1, 0.7), 2000, 200, 9);
    const auto cb = metropolis(shifted, v1(1.0), ProposalSpec::isotropic(1, 0.7), 2000, 200, 9);
    const auto ia = quantile_set_estimate(ca, coordinate(0), 0.01);
    const auto ib = quantile_set_estimate(cb, coordinate(0), 0.01);
    CHECK(ia.lower == ib.lower);
    CHECK(ia.upper == ib.upper);
}

TEST_CASE("chain-filtered level sets") {
    const auto target = [](const Vector& t) { return -t.squaredNorm(); };
    const ThetaBox box(Vector::Constant(3, -2.0), Vector::Constant(3, 2.0));
    const LogDensity bounded = [&](const Vector& t) { return box.contains(t) ? target(t) : kNegInf; };
    const auto chain = metropolis(bounded, Vector::Zero(3), ProposalSpec::isotropic(3, 0.6), 4000, 400, 2);
    const auto r = level_set_region(bounded, box, 1.0, chain, default_starts(box));
    CHECK_FALSE(r.spacing.has_value());
    CHECK(r.points.rows() > 0);
    for (Index i = 0; i < r.points.rows(); ++i) {
        CHECK(r.points.row(i).squaredNorm() <= 1.0 + 1e-9);
        CHECK(r.values[i] >= r.threshold);
    }
    CHECK_THROWS(level_set_region(bounded, box, 1.0, GridSpec{0.1}));
}

TEST_CASE("hausdorff examples") {
    CHECK(hausdorff(Matrix::Constant(1, 1, 0.0), Matrix::Constant(1, 1, 1.0)) == 1.0);
    Matrix a(2, 2);
    a << 0, 0, 1, 0;
    CHECK(hausdorff(a, a) == 0.0);
    Matrix b(1, 2);
    b << 0, 1;
    CHECK(hausdorff(a, b) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
    CHECK_THROWS(hausdorff(Matrix(0, 2), b));
}

TEST_CASE("hausdorff is a metric on random point sets") {
    std::mt19937_64 rng(31);
    std::normal_distribution<double> z(0.0, 1.0);
    std::uniform_int_distribution<int> size(1, 12);
    const auto random_set = [&] {
        Matrix m(size(rng), 2);
        for (Index i = 0; i < m.rows(); ++i) m.row(i) << z(rng), z(rng);
        return m;
    };
    for (int rep = 0; rep < 100; ++rep) {
        const Matrix A = random_set(), B = random_set(), C = random_set();
        const double ab = hausdorff(A, B);
        CHECK(ab == hausdorff(B, A));
        CHECK(ab > 0.0);
        CHECK(ab <= hausdorff(A, C) + hausdorff(C, B) + 1e-12);
        Matrix Ad(A.rows() * 2, 2);
        Ad << A, A.colwise().reverse();
        CHECK(hausdorff(A, Ad) == 0.0);
    }
}

TEST_CASE("level-set hulls approach the identified interval as n grows") {
    int improved = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        double dist[2];
        const Index ns[2] = {500, 5000};
        for (int k = 0; k < 2; ++k) {
            const IntervalPosterior post(ns[k], 500 + seed);
            const auto r = level_set_region(post.target(), post.box(), epsilon_schedule(ns[k], EpsilonKind::loglog_n),
                                            GridSpec{0.001}, default_starts(post.box()));
            dist[k] = hausdorff(pair_points(r.hull_lower[0], r.hull_upper[0]), pair_points(0.0, 5.0));
        }
        improved += dist[1] < dist[0];
    }
    CAPTURE(improved);
    CHECK(improved >= 16);
}
