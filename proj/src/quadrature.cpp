#include "mib/quadrature.hpp"

#include "mib/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <queue>

namespace mib {

GaussLegendreRule gauss_legendre(int n) {
    if (n < 1) throw Error("Gauss-Legendre order must be positive");
    GaussLegendreRule rule;
    rule.nodes.resize(static_cast<std::size_t>(n));
    rule.weights.resize(static_cast<std::size_t>(n));
    const int half = (n + 1) / 2;
    for (int i = 0; i < half; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0;
            double p1 = 0.0;
            for (int k = 1; k <= n; ++k) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p2) / k;
            }
            dp = n * (x * p0 - p1) / (x * x - 1.0);
            const double dx = p0 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.nodes[static_cast<std::size_t>(i)] = -x;
        rule.nodes[static_cast<std::size_t>(n - 1 - i)] = x;
        rule.weights[static_cast<std::size_t>(i)] = w;
        rule.weights[static_cast<std::size_t>(n - 1 - i)] = w;
    }
    return rule;
}

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct Panel {
    double a;
    double b;
    double whole;   // one-rule estimate over [a, b]
    double left;    // one-rule estimates over the two halves
    double right;
    double err;
};

struct PanelOrder {
    bool operator()(const Panel& x, const Panel& y) const { return x.err < y.err; }
};

class Integrator {
public:
    Integrator(const std::function<double(double)>& log_f, const QuadratureOptions& opts)
        : log_f_(log_f), opts_(opts), rule_(gauss_legendre(opts.order)) {}

    QuadratureResult run(double a, double b) {
        if (!(a < b)) {
            QuadratureResult r;
            r.log_value = kNegInf;
            r.converged = true;
            return r;
        }
        // The shift starts at the largest log value seen on the initial panels
        // and is raised (with a restart) if refinement finds a much larger one.
        shift_ = kNegInf;
        for (int attempt = 0; attempt < 8; ++attempt) {
            restart_ = false;
            auto r = attempt_run(a, b);
            if (!restart_) return r;
        }
        throw NumericalError("quadrature rescaling did not settle");
    }

private:
    double rule_sum(double a, double b, const double* known = nullptr) {
        const double half = 0.5 * (b - a);
        const double mid = 0.5 * (a + b);
        double s = 0.0;
        for (std::size_t k = 0; k < rule_.nodes.size(); ++k) {
            double lf;
            if (known) {
                lf = known[k];
            } else {
                lf = log_f_(mid + half * rule_.nodes[k]);
                ++evaluations_;
            }
            if (std::isnan(lf)) throw NumericalError("integrand returned NaN");
            if (lf > shift_ + 400.0) {
                shift_ = lf;
                restart_ = true;
            }
            s += rule_.weights[k] * std::exp(lf - shift_);
        }
        return s * half;
    }

    Panel make_panel(double a, double b, double whole) {
        const double m = 0.5 * (a + b);
        Panel p{a, b, whole, rule_sum(a, m), rule_sum(m, b), 0.0};
        p.err = std::abs(p.left + p.right - p.whole);
        return p;
    }

    QuadratureResult attempt_run(double a, double b) {
        const int k0 = std::max(1, opts_.initial_panels);
        const double h = (b - a) / k0;

        if (shift_ == kNegInf) {
            // Scan the initial panel nodes for the scale.
            scan_.clear();
            for (int i = 0; i < k0; ++i) {
                const double pa = a + i * h;
                const double pb = (i + 1 == k0) ? b : pa + h;
                const double half = 0.5 * (pb - pa);
                const double mid = 0.5 * (pa + pb);
                for (double x : rule_.nodes) {
                    const double lf = log_f_(mid + half * x);
                    ++evaluations_;
                    if (std::isnan(lf)) throw NumericalError("integrand returned NaN");
                    shift_ = std::max(shift_, lf);
                    scan_.push_back(lf);
                }
            }
            if (shift_ == kNegInf) {
                QuadratureResult r;
                r.log_value = kNegInf;
                r.converged = true;
                r.evaluations = evaluations_;
                return r;
            }
        }

        std::priority_queue<Panel, std::vector<Panel>, PanelOrder> heap;
        double total = 0.0;
        double err = 0.0;
        for (int i = 0; i < k0; ++i) {
            const double pa = a + i * h;
            const double pb = (i + 1 == k0) ? b : pa + h;
            const bool cached = scan_.size() == static_cast<std::size_t>(k0) * rule_.nodes.size();
            const double* known = cached ? scan_.data() + static_cast<std::size_t>(i) * rule_.nodes.size() : nullptr;
            Panel p = make_panel(pa, pb, rule_sum(pa, pb, known));
            if (restart_) return {};
            total += p.left + p.right;
            err += p.err;
            heap.push(p);
        }

        int panels = k0;
        auto done = [&] { return err <= opts_.rel_tol * std::abs(total); };
        while (!done() && panels < opts_.max_panels) {
            Panel worst = heap.top();
            heap.pop();
            const double m = 0.5 * (worst.a + worst.b);
            Panel l = make_panel(worst.a, m, worst.left);
            Panel r = make_panel(m, worst.b, worst.right);
            if (restart_) return {};
            total += (l.left + l.right + r.left + r.right) - (worst.left + worst.right);
            err += l.err + r.err - worst.err;
            heap.push(l);
            heap.push(r);
            ++panels;
            if (panels % 256 == 0) {
                // Refresh running sums against drift.
                auto copy = heap;
                total = 0.0;
                err = 0.0;
                while (!copy.empty()) {
                    total += copy.top().left + copy.top().right;
                    err += copy.top().err;
                    copy.pop();
                }
            }
        }

        QuadratureResult res;
        res.evaluations = evaluations_;
        if (total <= 0.0) {
            res.log_value = kNegInf;
            res.converged = true;
            return res;
        }
        res.log_value = shift_ + std::log(total);
        res.rel_error = err / total;
        res.converged = done();
        return res;
    }

    const std::function<double(double)>& log_f_;
    QuadratureOptions opts_;
    GaussLegendreRule rule_;
    double shift_ = kNegInf;
    std::vector<double> scan_;
    bool restart_ = false;
    long evaluations_ = 0;
};

} // namespace

QuadratureResult integrate_exp(const std::function<double(double)>& log_f, double a, double b,
                               const QuadratureOptions& opts) {
    Integrator integ(log_f, opts);
    return integ.run(a, b);
}

QuadratureResult integrate_exp_2d(const std::function<double(double, double)>& log_f, double ax, double bx,
                                  double ay, double by, const QuadratureOptions& opts) {
    QuadratureOptions inner = opts;
    inner.rel_tol = opts.rel_tol / 10.0;
    inner.initial_panels = std::max(4, opts.initial_panels / 4);
    long evals = 0;
    double worst_inner = 0.0;
    bool inner_ok = true;
    const std::function<double(double)> outer = [&](double x) {
        const std::function<double(double)> slice = [&](double y) { return log_f(x, y); };
        const auto r = integrate_exp(slice, ay, by, inner);
        evals += r.evaluations;
        worst_inner = std::max(worst_inner, r.rel_error);
        inner_ok = inner_ok && r.converged;
        return r.log_value;
    };
    auto res = integrate_exp(outer, ax, bx, opts);
    res.evaluations = evals;
    res.rel_error += worst_inner;
    res.converged = res.converged && inner_ok;
    return res;
}

} // namespace mib
