#include "mib/experiments.hpp"
#include "mib/mcmc.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace mib;

namespace {

OrthantMethod parse_method(const std::string& s) {
    if (s == "automatic") return OrthantMethod::automatic;
    if (s == "diagonal_exact") return OrthantMethod::diagonal_exact;
    if (s == "monte_carlo") return OrthantMethod::monte_carlo;
    throw Error("unknown orthant method '" + s + "'");
}

ModelSpec model_spec(const std::string& kind, int instruments, int regressors,
                     const std::vector<std::pair<std::string, std::string>>& bounds) {
    ModelSpec spec;
    spec.kind = kind;
    spec.instruments = instruments;
    spec.regressors = regressors;
    for (const auto& [column, side] : bounds) {
        if (side != "upper" && side != "lower") throw Error("bound side must be upper or lower");
        spec.bounds.push_back({column, side == "upper" ? BoundSide::upper : BoundSide::lower});
    }
    return spec;
}

/// Likelihood and flat or normal posterior over a box for one dataset.
class Posterior {
public:
    Posterior(const ModelSpec& spec, const Matrix& values, std::vector<std::string> columns, const Vector& psi,
              std::optional<Matrix> V, const Vector& lower, const Vector& upper, std::optional<Vector> prior_mean,
              std::optional<Vector> prior_sd)
        : ctx_(build_model(spec), Dataset(values, std::move(columns)),
               V ? Hyperparameters(psi, *V) : Hyperparameters::identity(psi)),
          prior_(make_prior(lower, upper, prior_mean, prior_sd)) {}

    double log_likelihood(const Vector& theta) const { return log_limited_likelihood(ctx_, theta); }
    double log_posterior(const Vector& theta) const { return log_posterior_unnorm(ctx_, prior_, theta); }
    Vector moment_mean(const Vector& theta) const { return ctx_.moment_mean(theta); }

    py::tuple sample(Index B, std::uint64_t seed, std::optional<Vector> init, std::optional<double> proposal_sd,
                     std::optional<Index> burn_in) const {
        const Vector start = init ? *init : prior_.box().center();
        const auto target = [this](const Vector& t) { return log_posterior(t); };
        Chain c;
        {
            py::gil_scoped_release release;
            c = metropolis(target, start, ProposalSpec::isotropic(start.size(), proposal_sd.value_or(std::sqrt(0.5))),
                           B, burn_in.value_or(default_burn_in(B)), seed);
        }
        return py::make_tuple(c.draws, c.log_post, c.acceptance_rate);
    }

    py::tuple level_set(const std::string& epsilon, double grid_spacing) const {
        const auto target = [this](const Vector& t) { return log_posterior(t); };
        const auto r = level_set_region(target, prior_.box(), epsilon_schedule(ctx_.n(), parse_epsilon_kind(epsilon)),
                                        GridSpec{grid_spacing});
        return py::make_tuple(r.hull_lower, r.hull_upper, r.points);
    }

    Index n() const { return ctx_.n(); }
    Index dim() const { return ctx_.dim(); }

private:
    static ThetaPrior make_prior(const Vector& lower, const Vector& upper, const std::optional<Vector>& mean,
                                 const std::optional<Vector>& sd) {
        const ThetaBox box(lower, upper);
        if (mean && sd) return ThetaPrior::normal(*mean, *sd, box);
        if (mean || sd) throw Error("a normal prior needs both prior_mean and prior_sd");
        return ThetaPrior::flat(box);
    }

    LogLikelihoodContext ctx_;
    ThetaPrior prior_;
};

} // namespace

PYBIND11_MODULE(_mibayes, m) {
    m.doc() = "Bayesian inference for moment inequality models";

    py::register_exception<Error>(m, "MibError", PyExc_ValueError);

    m.def(
        "generate",
        [](const std::string& design, Index n, std::uint64_t seed) {
            Dataset d = design == "ex51"   ? gen_example_5_1(n, seed)
                        : design == "ex52" ? gen_example_5_2(n, seed)
                        : design == "ex53" ? gen_example_5_3(n, seed)
                        : design == "ex41" ? gen_example_4_1(n, seed)
                                           : throw Error("unknown design '" + design + "'");
            return py::make_tuple(d.values(), d.columns());
        },
        py::arg("design"), py::arg("n"), py::arg("seed") = 1);

    m.def(
        "orthant_probability",
        [](const Vector& mean, const Matrix& cov, const std::string& method, int mc_samples, std::uint64_t seed) {
            const auto e = orthant_estimate({mean, cov, parse_method(method), mc_samples, seed});
            return py::make_tuple(e.probability, e.std_error);
        },
        py::arg("mean"), py::arg("cov"), py::arg("method") = "automatic", py::arg("mc_samples") = 65536,
        py::arg("seed") = 7);

    m.def(
        "orthant_bounds",
        [](const Vector& mean, const Matrix& cov) {
            const auto b = orthant_bounds(mean, cov);
            return py::make_tuple(b.lower, b.upper);
        },
        py::arg("mean"), py::arg("cov"));

    m.def(
        "quantile_interval",
        [](const Matrix& draws, double pi, Index coord) {
            Chain c;
            c.draws = draws;
            c.log_post = Vector::Zero(draws.rows());
            const auto est = quantile_set_estimate(c, coordinate(coord), pi);
            return py::make_tuple(est.lower, est.upper);
        },
        py::arg("draws"), py::arg("pi"), py::arg("coordinate") = 0);

    m.def("epsilon_schedule",
          [](Index n, const std::string& kind) { return epsilon_schedule(n, parse_epsilon_kind(kind)); },
          py::arg("n"), py::arg("kind"));

    m.def(
        "effective_config",
        [](const std::string& text) { return config_to_json(parse_config(Json::parse(text))).dump(); },
        py::arg("config_json"));

    m.def(
        "run_config",
        [](const std::string& text) {
            const auto cfg = parse_config(Json::parse(text));
            RunSummary s;
            {
                py::gil_scoped_release release;
                s = run_experiment(cfg);
            }
            std::vector<std::string> files;
            for (const auto& f : s.files) files.push_back(f.string());
            return files;
        },
        py::arg("config_json"));

    py::class_<Posterior>(m, "Posterior")
        .def(py::init([](const std::string& model, const Matrix& values, std::vector<std::string> columns,
                         const Vector& psi, const Vector& lower, const Vector& upper, std::optional<Matrix> V,
                         int instruments, int regressors,
                         const std::vector<std::pair<std::string, std::string>>& bounds,
                         std::optional<Vector> prior_mean, std::optional<Vector> prior_sd) {
                 return Posterior(model_spec(model, instruments, regressors, bounds), values, std::move(columns), psi,
                                  std::move(V), lower, upper, std::move(prior_mean), std::move(prior_sd));
             }),
             py::arg("model"), py::arg("values"), py::arg("columns"), py::arg("psi"), py::arg("lower"),
             py::arg("upper"), py::arg("V") = py::none(), py::arg("instruments") = 0, py::arg("regressors") = 0,
             py::arg("bounds") = std::vector<std::pair<std::string, std::string>>{},
             py::arg("prior_mean") = py::none(), py::arg("prior_sd") = py::none())
        .def("log_likelihood", &Posterior::log_likelihood, py::arg("theta"))
        .def("log_posterior", &Posterior::log_posterior, py::arg("theta"))
        .def("moment_mean", &Posterior::moment_mean, py::arg("theta"))
        .def("sample", &Posterior::sample, py::arg("B"), py::arg("seed") = 1, py::arg("init") = py::none(),
             py::arg("proposal_sd") = py::none(), py::arg("burn_in") = py::none())
        .def("level_set", &Posterior::level_set, py::arg("epsilon") = "loglog-n", py::arg("grid_spacing") = 0.01)
        .def_property_readonly("n", &Posterior::n)
        .def_property_readonly("dim", &Posterior::dim);
}
