#include "mib/core.hpp"
#include "mib/normal.hpp"
#include "mib/quadrature.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>

using namespace mib;

namespace {

struct LogPhiRef {
    double x;
    double value;
};

// 20-digit references from arbitrary-precision evaluation.
constexpr LogPhiRef kLogPhi[] = {
    {-40.0, -804.60844201375378817},     {-38.0, -726.5572160188201301},
    {-20.0, -203.91715537109726394},     {-10.5, -58.404187061073243416},
    {-9.5, -48.306019298965230282},      {-5.0, -15.064998393988725736},
    {-1.0, -1.8410216450092635058},      {0.0, -0.69314718055994530942},
    {1.0, -0.17275377902344988953},      {3.0, -0.0013508099647481937988},
    {8.0, -6.2209605742717860585e-16},
};

} // namespace

TEST_CASE("log normal cdf against high-precision references") {
    for (const auto& r : kLogPhi) {
        CAPTURE(r.x);
        CHECK(log_norm_cdf(r.x) == doctest::Approx(r.value).epsilon(1e-12));
    }
    CHECK(log_norm_cdf(-std::numeric_limits<double>::infinity()) == -std::numeric_limits<double>::infinity());
    CHECK(std::isfinite(log_norm_cdf(-1e5)));
    CHECK(log_norm_cdf(40.0) == 0.0);
}

TEST_CASE("log normal cdf is continuous and increasing across branch points") {
    double prev = log_norm_cdf(-60.0);
    for (double x = -59.99; x < 12.0; x += 0.01) {
        const double v = log_norm_cdf(x);
        CHECK(v >= prev);
        prev = v;
    }
    const double below = log_norm_cdf(std::nextafter(-10.0, -11.0));
    const double above = log_norm_cdf(-10.0);
    CHECK(std::abs(above - below) < 1e-12 * std::abs(above));
}

TEST_CASE("normal cdf and pdf") {
    CHECK(norm_cdf(1.6449) == doctest::Approx(0.95).epsilon(5e-5));
    CHECK(norm_cdf(0.0) == 0.5);
    CHECK(norm_pdf(0.0) == doctest::Approx(1.0 / 2.5066282746310005024).epsilon(1e-15));
}

TEST_CASE("log_add_exp") {
    const double ninf = -std::numeric_limits<double>::infinity();
    CHECK(log_add_exp(ninf, 3.0) == 3.0);
    CHECK(log_add_exp(3.0, ninf) == 3.0);
    CHECK(log_add_exp(0.0, 0.0) == doctest::Approx(std::log(2.0)));
    CHECK(log_add_exp(1000.0, 1000.0) == doctest::Approx(1000.0 + std::log(2.0)));
    CHECK(log_add_exp(-2000.0, -2001.0) == doctest::Approx(-2000.0 + std::log1p(std::exp(-1.0))));
}

TEST_CASE("gauss-legendre rules integrate polynomials exactly") {
    for (int n = 1; n <= 12; ++n) {
        const auto rule = gauss_legendre(n);
        REQUIRE(rule.nodes.size() == static_cast<std::size_t>(n));
        double wsum = 0.0;
        for (double w : rule.weights) wsum += w;
        CHECK(wsum == doctest::Approx(2.0).epsilon(1e-14));
        const int deg = 2 * n - 2;
        double s = 0.0;
        for (int i = 0; i < n; ++i) s += rule.weights[i] * std::pow(rule.nodes[i], deg);
        CHECK(s == doctest::Approx(2.0 / (deg + 1)).epsilon(1e-13));
    }
    CHECK_THROWS(gauss_legendre(0));
}

TEST_CASE("adaptive quadrature of the gaussian kernel") {
    const auto r = integrate_exp([](double x) { return -0.5 * x * x; }, -12.0, 12.0);
    CHECK(r.converged);
    CHECK(std::exp(r.log_value) == doctest::Approx(2.5066282746310005024).epsilon(1e-8));

    const auto shifted = integrate_exp([](double x) { return -5000.0 - 0.5 * x * x; }, -12.0, 12.0);
    CHECK(shifted.converged);
    CHECK(shifted.log_value == doctest::Approx(-5000.0 + std::log(2.5066282746310005024)).epsilon(1e-12));

    const auto up = integrate_exp([](double x) { return 800.0 - 0.5 * x * x; }, -12.0, 12.0);
    CHECK(up.log_value == doctest::Approx(800.0 + std::log(2.5066282746310005024)).epsilon(1e-12));
}

TEST_CASE("adaptive quadrature of a sharp plateau") {
    // indicator-like integrand: exp of a steep log-cdf ramp on both sides of [1, 3]
    const auto r = integrate_exp(
        [](double x) { return log_norm_cdf(200.0 * (x - 1.0)) + log_norm_cdf(200.0 * (3.0 - x)); }, -2.0, 6.0,
        QuadratureOptions{1e-9, 10, 32, 20000});
    CHECK(r.converged);
    CHECK(std::exp(r.log_value) == doctest::Approx(2.0).epsilon(1e-7));
}

TEST_CASE("quadrature over an empty support and with NaN") {
    const auto r = integrate_exp([](double) { return -std::numeric_limits<double>::infinity(); }, 0.0, 1.0);
    CHECK(r.log_value == -std::numeric_limits<double>::infinity());
    CHECK_THROWS_AS(integrate_exp([](double) { return std::nan(""); }, 0.0, 1.0), NumericalError);
}

TEST_CASE("two-dimensional quadrature") {
    const auto r = integrate_exp_2d([](double x, double y) { return -0.5 * (x * x + y * y); }, -10, 10, -10, 10);
    CHECK(r.converged);
    CHECK(std::exp(r.log_value) == doctest::Approx(2.0 * std::numbers::pi).epsilon(1e-7));

    const auto box = integrate_exp_2d([](double, double) { return 0.0; }, 0, 2, -1, 2);
    CHECK(std::exp(box.log_value) == doctest::Approx(6.0).epsilon(1e-12));
}
