#include "mib/experiments.hpp"

#include "mib/mcmc.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

namespace mib {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

void check_n(Index n) {
    if (n < 1) throw Error("sample size n must be >= 1");
}

Index attempt_cap(Index n) { return 100 * n; }

/// Normal draw with the given variance.
double draw_normal(std::mt19937_64& rng, double mean, double variance) {
    std::normal_distribution<double> dist(mean, std::sqrt(variance));
    return dist(rng);
}

std::string join_errors(const std::vector<std::string>& errs) {
    std::string s = "invalid configuration:";
    for (const auto& e : errs) s += "\n  - " + e;
    return s;
}

// JSON helpers; each records a message and returns nothing on failure.
struct Reader {
    std::vector<std::string>& errors;

    std::optional<double> number(const Json& j, const std::string& where) {
        if (!j.is_number()) {
            errors.push_back(where + ": expected a number");
            return std::nullopt;
        }
        return j.get<double>();
    }

    std::optional<Index> integer(const Json& j, const std::string& where) {
        if (!j.is_number_integer()) {
            errors.push_back(where + ": expected an integer");
            return std::nullopt;
        }
        return j.get<Index>();
    }

    std::optional<std::string> string(const Json& j, const std::string& where) {
        if (!j.is_string()) {
            errors.push_back(where + ": expected a string");
            return std::nullopt;
        }
        return j.get<std::string>();
    }

    /// Array of numbers, or a single number broadcast to length `fill`.
    std::optional<Vector> vector(const Json& j, const std::string& where, Index fill = 0) {
        if (j.is_number() && fill > 0) return Vector::Constant(fill, j.get<double>());
        if (!j.is_array() || j.empty()) {
            errors.push_back(where + ": expected a non-empty array of numbers");
            return std::nullopt;
        }
        Vector v(static_cast<Index>(j.size()));
        for (std::size_t i = 0; i < j.size(); ++i) {
            if (!j[i].is_number()) {
                errors.push_back(where + "[" + std::to_string(i) + "]: expected a number");
                return std::nullopt;
            }
            v[static_cast<Index>(i)] = j[i].get<double>();
        }
        return v;
    }

    std::optional<std::vector<std::vector<int>>> index_sets(const Json& j, const std::string& where) {
        if (!j.is_array()) {
            errors.push_back(where + ": expected an array of index lists");
            return std::nullopt;
        }
        std::vector<std::vector<int>> out;
        for (std::size_t i = 0; i < j.size(); ++i) {
            if (!j[i].is_array()) {
                errors.push_back(where + "[" + std::to_string(i) + "]: expected a list of 1-based indices");
                return std::nullopt;
            }
            std::vector<int> set;
            for (const auto& x : j[i]) {
                if (!x.is_number_integer() || x.get<int>() < 1) {
                    errors.push_back(where + "[" + std::to_string(i) + "]: indices must be integers >= 1");
                    return std::nullopt;
                }
                set.push_back(x.get<int>() - 1);
            }
            std::sort(set.begin(), set.end());
            out.push_back(std::move(set));
        }
        return out;
    }

    void known_keys(const Json& j, const std::set<std::string>& keys, const std::string& where) {
        for (const auto& [k, v] : j.items()) {
            if (!keys.count(k)) errors.push_back(where + ": unknown key '" + k + "'");
        }
    }
};

Json vec_json(const Vector& v) {
    Json a = Json::array();
    for (Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

Json sets_json(const std::vector<std::vector<int>>& sets) {
    Json a = Json::array();
    for (const auto& s : sets) {
        Json b = Json::array();
        for (int i : s) b.push_back(i + 1);
        a.push_back(b);
    }
    return a;
}

std::string fmt(double x) { return format_double(x); }

std::vector<double> linspace(double a, double b, double step) {
    const auto count = static_cast<Index>(std::llround((b - a) / step));
    std::vector<double> out;
    for (Index i = 0; i <= count; ++i) out.push_back(i == count ? b : a + static_cast<double>(i) * step);
    return out;
}

ThetaBox config_box(const ExperimentConfig& cfg) {
    if (!cfg.box_lower || !cfg.box_upper) throw Error("configuration needs box.lower and box.upper");
    return ThetaBox(*cfg.box_lower, *cfg.box_upper);
}

Hyperparameters config_hyper(const ExperimentConfig& cfg, Index p) {
    const Vector psi = cfg.psi ? *cfg.psi : Vector::Constant(p, 0.1);
    if (psi.size() != p) {
        throw DimensionError("psi has " + std::to_string(psi.size()) + " entries, the model has " +
                             std::to_string(p) + " moments");
    }
    if (cfg.V) return Hyperparameters(psi, *cfg.V);
    return Hyperparameters::identity(psi);
}

ThetaPrior config_prior(const ExperimentConfig& cfg, const ThetaBox& box) {
    if (cfg.prior == "flat") return ThetaPrior::flat(box);
    if (!cfg.prior_mean || !cfg.prior_sd) throw Error("normal prior needs mean and sd");
    return ThetaPrior::normal(*cfg.prior_mean, *cfg.prior_sd, box);
}

Vector sampler_sd(const ExperimentConfig& cfg, Index d) {
    if (cfg.sampler.proposal_sd) {
        if (cfg.sampler.proposal_sd->size() != d) throw DimensionError("proposal_sd does not match the dimension");
        return *cfg.sampler.proposal_sd;
    }
    return Vector::Constant(d, std::sqrt(0.5));
}

Vector sampler_init(const ExperimentConfig& cfg, const ThetaBox& box) {
    if (cfg.sampler.init) {
        if (cfg.sampler.init->size() != box.dim()) throw DimensionError("init does not match the dimension");
        return *cfg.sampler.init;
    }
    return box.center();
}

Chain run_chain(const ExperimentConfig& cfg, const LogDensity& target, const ThetaBox& box, std::uint64_t seed) {
    const Index B = cfg.sampler.B;
    const Index burn = cfg.sampler.burn_in ? *cfg.sampler.burn_in : default_burn_in(B);
    return metropolis(target, sampler_init(cfg, box), ProposalSpec{sampler_sd(cfg, box.dim())}, B, burn, seed);
}

std::string cell_tag(Index n) { return "n" + std::to_string(n); }

Json run_metadata(const ExperimentConfig& cfg, Index n, const SeedSet& seeds) {
    return Json{{"experiment", cfg.experiment},
                {"n", n},
                {"seed", cfg.seed},
                {"data_seed", seeds.data},
                {"chain_seed", seeds.chain},
                {"integration_seed", seeds.integration}};
}

void estimation_outputs(const ExperimentConfig& cfg, const std::filesystem::path& dir, const std::string& tag,
                        const LogDensity& target, const ThetaBox& box, Index n, std::uint64_t chain_seed,
                        const std::vector<std::string>& names, RunSummary& summary) {
    const Chain chain = run_chain(cfg, target, box, chain_seed);
    const auto chain_path = dir / ("chain_" + tag + ".csv");
    write_chain(chain_path, chain, names);
    write_json(dir / ("chain_" + tag + ".json"), chain_metadata(chain));
    summary.files.push_back(chain_path);

    std::vector<std::vector<std::string>> rows;
    for (Index j = 0; j < box.dim(); ++j) {
        for (const auto& rule : cfg.estimator.pi_rules) {
            const double pi = pi_rule_value(rule, n);
            const auto est = quantile_set_estimate(chain, coordinate(j), pi, names[static_cast<std::size_t>(j)]);
            rows.push_back({names[static_cast<std::size_t>(j)], "quantile", rule, fmt(pi), fmt(est.lower),
                            fmt(est.upper)});
        }
    }
    for (const auto kind : cfg.estimator.epsilon_kinds) {
        const double eps = epsilon_schedule(n, kind);
        const auto region = box.dim() <= 2
                                ? level_set_region(target, box, eps, GridSpec{cfg.estimator.grid_spacing})
                                : level_set_region(target, box, eps, chain);
        const auto ls_path = dir / ("levelset_" + to_string(kind) + "_" + tag + ".csv");
        write_level_set(ls_path, region, names);
        write_json(dir / ("levelset_" + to_string(kind) + "_" + tag + ".json"), level_set_metadata(region));
        summary.files.push_back(ls_path);
        for (Index j = 0; j < box.dim(); ++j) {
            rows.push_back({names[static_cast<std::size_t>(j)], "level-set", to_string(kind), fmt(eps),
                            fmt(region.hull_lower[j]), fmt(region.hull_upper[j])});
        }
    }
    const auto path = dir / ("intervals_" + tag + ".csv");
    write_rows(path, {"coordinate", "estimator", "rule", "value", "lower", "upper"}, rows);
    summary.files.push_back(path);
}

std::vector<std::string> theta_labels(Index d) {
    std::vector<std::string> out;
    for (Index j = 0; j < d; ++j) out.push_back("theta" + std::to_string(j + 1));
    return out;
}

CandidatePosterior selection_for(const ExperimentConfig& cfg, const MomentModel& model, const Dataset& data,
                                 const Hyperparameters& hyper, const ThetaBox& box, std::uint64_t seed) {
    const auto candidates = enumerate_candidates(model.p(), model.d(), cfg.selection.constraints);
    IntegrationSettings settings;
    settings.mc_samples = cfg.selection.mc_samples;
    settings.seed = seed;
    CandidateLogPrior custom;
    if (cfg.selection.candidate_prior == "uniform") {
        custom = [](const Combination&, Index) { return 0.0; };
    } else if (cfg.selection.candidate_prior == "power") {
        const double alpha = cfg.selection.alpha;
        custom = [alpha](const Combination& c, Index n) { return candidate_prior_a1(c, n, alpha); };
    }
    if (cfg.selection.approach == "A1") {
        return mpc_select(candidates, model, data, hyper, ApproachOne{cfg.selection.alpha, config_prior(cfg, box)},
                          settings, custom);
    }
    const double s2 = sigma_n2_value(cfg.selection.sigma_n2, data.n());
    return mpc_select(candidates, model, data, hyper, ApproachTwo{s2, box}, settings, custom);
}

void selection_outputs(const ExperimentConfig& cfg, const std::filesystem::path& dir, const std::string& tag,
                       const MomentModel& model, const Dataset& data, const Hyperparameters& hyper,
                       const ThetaBox& box, std::uint64_t seed, Json meta, RunSummary& summary) {
    const auto post = selection_for(cfg, model, data, hyper, box, seed);
    const auto path = dir / ("selection_" + tag + ".csv");
    write_selection_report(path, post);
    meta["selection"] = selection_metadata(post);
    write_json(dir / ("selection_" + tag + ".json"), meta);
    summary.files.push_back(path);
}

double distance_to_segment(const Vector& x, const Vector& a, const Vector& b) {
    const Vector ab = b - a;
    const double t = std::clamp((x - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
    return (x - (a + t * ab)).norm();
}

} // namespace

// ---------------------------------------------------------------------------
// Generators

Dataset gen_example_5_1(Index n, std::uint64_t seed) {
    check_n(n);
    std::mt19937_64 rng(seed);
    Matrix v(n, 2);
    Index kept = 0;
    for (Index attempts = 0; kept < n; ++attempts) {
        if (attempts >= attempt_cap(n)) throw Error("rejection sampler exceeded 100 n attempts");
        const double y1 = draw_normal(rng, 0.0, 0.1);
        const double y2 = draw_normal(rng, 5.0, 0.1);
        if (y1 > y2) continue;
        v(kept, 0) = y1;
        v(kept, 1) = y2;
        ++kept;
    }
    return Dataset(std::move(v), {"y1", "y2"});
}

Dataset gen_example_5_2(Index n, std::uint64_t seed) {
    check_n(n);
    std::mt19937_64 rng(seed);
    Matrix v(n, 6);
    Index kept = 0;
    for (Index attempts = 0; kept < n; ++attempts) {
        if (attempts >= attempt_cap(n)) throw Error("rejection sampler exceeded 100 n attempts");
        const double x1 = draw_normal(rng, 1.0, 1.0);
        const double x2 = draw_normal(rng, 1.0, 1.0);
        const double y1 = draw_normal(rng, 3.0, 0.1);
        const double y2 = draw_normal(rng, 6.0, 0.1);
        const double z1 = x1 + x2;
        const double z2 = x1 + 2.0 * x2;
        if (z1 < 0.0 || z2 < 0.0) continue;
        v.row(kept) << y1, y2, x1, x2, z1, z2;
        ++kept;
    }
    return Dataset(std::move(v), {"y1", "y2", "x1", "x2", "z1", "z2"});
}

Dataset gen_example_5_3(Index n, std::uint64_t seed) {
    check_n(n);
    std::mt19937_64 rng(seed);
    Matrix v(n, 4);
    const double means[4] = {-1.0, 1.0, 2.0, 3.0};
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < 4; ++j) v(i, j) = draw_normal(rng, means[j], 0.1);
    }
    return Dataset(std::move(v), {"y1", "y2", "y3", "y4"});
}

Dataset gen_example_4_1(Index n, std::uint64_t seed) {
    check_n(n);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    Matrix v(n, 6);
    for (Index i = 0; i < n; ++i) {
        const double x1 = unif(rng);
        const double u1 = unif(rng);
        const double u2 = unif(rng);
        const double y = 0.9 * x1;
        v.row(i) << y + 0.1 * (u1 - 1.0), y + 0.1 * (u2 + 1.0), x1, 1.0, x1 + 1.0, 1.0;
    }
    return Dataset(std::move(v), {"y1", "y2", "x1", "x2", "z1", "z2"});
}

MomentModel example_5_1_model() { return make_interval_mean_model(); }
MomentModel example_5_2_model() { return make_interval_regression_model(2, 2); }
MomentModel example_4_1_model() { return make_interval_regression_model(2, 2); }

MomentModel example_5_3_model() {
    return make_bounds_model({{"y1", BoundSide::upper},
                              {"y2", BoundSide::lower},
                              {"y3", BoundSide::lower},
                              {"y4", BoundSide::upper}});
}

std::vector<Strip> example_5_2_stated_region() { return {{1.0, 1.0, 2.0, 4.0}, {4.0, 5.0, 9.0, 18.0}}; }

std::vector<Strip> example_5_2_implied_region(const Dataset& data) {
    const auto avg = average_affine_terms(example_5_2_model(), data);
    const auto stated = example_5_2_stated_region();
    std::vector<Strip> out;
    for (int l = 0; l < 2; ++l) {
        // upper moment: z y2 - z x'theta >= 0, lower: z x'theta - z y1 >= 0
        const double a1 = avg.A(2 + l, 0);
        const double a2 = avg.A(2 + l, 1);
        const double lo = -avg.b[2 + l];
        const double hi = avg.b[l];
        const double scale = stated[static_cast<std::size_t>(l)].a1 / a1;
        out.push_back({a1 * scale, a2 * scale, lo * scale, hi * scale});
    }
    return out;
}

double example_5_2_distance(const Vector& theta) {
    if (theta.size() != 2) throw DimensionError("Example 5.2 has a two-dimensional parameter");
    const auto strips = example_5_2_stated_region();
    bool inside = true;
    for (const auto& s : strips) {
        const double v = s.a1 * theta[0] + s.a2 * theta[1];
        inside = inside && v >= s.lo && v <= s.hi;
    }
    if (inside) return 0.0;
    const Vector a = (Vector(2) << 1.0, 1.0).finished();
    const Vector b = (Vector(2) << 11.0, -7.0).finished();
    const Vector c = (Vector(2) << 2.0, 2.0).finished();
    const Vector d = (Vector(2) << -8.0, 10.0).finished();
    return std::min({distance_to_segment(theta, a, b), distance_to_segment(theta, b, c),
                     distance_to_segment(theta, c, d), distance_to_segment(theta, d, a)});
}

// ---------------------------------------------------------------------------
// Configuration

double pi_rule_value(const std::string& rule, Index n) {
    const double x = static_cast<double>(n);
    if (rule == "1/n") return 1.0 / x;
    if (rule == "exp(-sqrt(n))") return std::exp(-std::sqrt(x));
    if (rule == "1/log(n)") return 1.0 / std::log(x);
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(rule, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != rule.size()) {
        throw Error("unknown pi rule '" + rule + "' (expected 1/n, exp(-sqrt(n)), 1/log(n) or a number)");
    }
    return v;
}

double sigma_n2_value(const std::string& rule, Index n) {
    const double x = static_cast<double>(n);
    if (rule == "n") return x;
    if (rule == "n^2") return x * x;
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(rule, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != rule.size() || !(v > 0.0)) {
        throw Error("unknown sigma_n2 rule '" + rule + "' (expected n, n^2 or a positive number)");
    }
    return v;
}

MomentModel build_model(const ModelSpec& spec) {
    if (spec.kind == "interval_mean") return make_interval_mean_model();
    if (spec.kind == "missing_data") return make_missing_data_model();
    if (spec.kind == "interval_regression") return make_interval_regression_model(spec.instruments, spec.regressors);
    if (spec.kind == "bounds") return make_bounds_model(spec.bounds);
    throw Error("unknown model kind '" + spec.kind + "'");
}

ExperimentConfig default_config(const std::string& experiment) {
    ExperimentConfig cfg;
    cfg.experiment = experiment;
    if (experiment == "ex51") {
        cfg.n = {500, 1000, 5000};
        cfg.psi = (Vector(2) << 0.1, 0.5).finished();
        cfg.box_lower = Vector::Constant(1, -2.0);
        cfg.box_upper = Vector::Constant(1, 7.0);
        cfg.sampler.init = Vector::Constant(1, 1.0);
        cfg.estimator.pi_rules = {"exp(-sqrt(n))", "1/n", "1/log(n)"};
        cfg.estimator.epsilon_kinds = {EpsilonKind::sqrt_n, EpsilonKind::log_n, EpsilonKind::loglog_n};
        cfg.estimator.grid_spacing = 0.001;
        cfg.run_selection = false;
    } else if (experiment == "ex52") {
        cfg.n = {500};
        cfg.psi = (Vector(4) << 0.1, 0.1, 0.5, 0.5).finished();
        cfg.box_lower = (Vector(2) << -12.0, -11.0).finished();
        cfg.box_upper = (Vector(2) << 15.0, 14.0).finished();
        cfg.sampler.init = (Vector(2) << 2.0, 1.0).finished();
        cfg.estimator.epsilon_kinds = {EpsilonKind::loglog_n};
        cfg.estimator.grid_spacing = 0.02;
        cfg.run_selection = false;
    } else if (experiment == "ex53") {
        cfg.n = {100, 1000, 5000};
        cfg.psi = Vector::Constant(4, 0.1);
        cfg.box_lower = Vector::Constant(1, 0.0);
        cfg.box_upper = Vector::Constant(1, 10.0);
        cfg.selection.approach = "A2";
        cfg.selection.sigma_n2 = "n^2";
        cfg.selection.constraints.free_masks = {{0}};
        cfg.run_estimation = false;
    } else if (experiment == "custom") {
        cfg.n = {};
        cfg.run_selection = false;
    } else {
        throw Error("unknown experiment '" + experiment + "' (expected ex51, ex52, ex53 or custom)");
    }
    return cfg;
}

ExperimentConfig parse_config(const Json& j) {
    std::vector<std::string> errors;
    Reader r{errors};
    if (!j.is_object()) throw Error("configuration must be a JSON object");
    r.known_keys(j,
                 {"experiment", "n", "seed", "psi", "V", "prior", "box", "sampler", "estimator", "selection", "model",
                  "data", "output_dir", "tasks"},
                 "config");

    std::string experiment = "ex51";
    if (j.contains("experiment")) {
        if (auto s = r.string(j["experiment"], "experiment")) experiment = *s;
    }
    ExperimentConfig cfg;
    try {
        cfg = default_config(experiment);
    } catch (const Error& e) {
        errors.push_back(e.what());
        throw Error(join_errors(errors));
    }

    if (j.contains("n")) {
        const Json& nj = j["n"];
        std::vector<Index> ns;
        if (nj.is_array()) {
            for (std::size_t i = 0; i < nj.size(); ++i) {
                if (auto v = r.integer(nj[i], "n[" + std::to_string(i) + "]")) ns.push_back(*v);
            }
        } else if (auto v = r.integer(nj, "n")) {
            ns.push_back(*v);
        }
        for (Index v : ns) {
            if (v < 3) errors.push_back("n: sample sizes must be >= 3");
        }
        cfg.n = ns;
    }
    if (j.contains("seed")) {
        if (!j["seed"].is_number_integer() || (!j["seed"].is_number_unsigned() && j["seed"].get<std::int64_t>() < 0)) {
            errors.push_back("seed: expected a non-negative integer");
        } else {
            cfg.seed = j["seed"].get<std::uint64_t>();
        }
    }
    if (j.contains("psi")) {
        if (auto v = r.vector(j["psi"], "psi")) {
            if ((v->array() <= 0.0).any()) errors.push_back("psi: components must be positive");
            cfg.psi = *v;
        }
    }
    if (j.contains("V")) {
        const Json& vj = j["V"];
        if (vj.is_string()) {
            if (vj.get<std::string>() != "identity") errors.push_back("V: expected \"identity\" or a matrix");
            cfg.V.reset();
        } else if (vj.is_array() && !vj.empty()) {
            const auto p = static_cast<Index>(vj.size());
            Matrix m(p, p);
            bool ok = true;
            for (Index a = 0; a < p && ok; ++a) {
                const Json& row = vj[static_cast<std::size_t>(a)];
                if (!row.is_array() || static_cast<Index>(row.size()) != p) {
                    errors.push_back("V: expected a square matrix");
                    ok = false;
                    break;
                }
                for (Index b = 0; b < p; ++b) {
                    const Json& x = row[static_cast<std::size_t>(b)];
                    if (!x.is_number()) {
                        errors.push_back("V: entries must be numbers");
                        ok = false;
                        break;
                    }
                    m(a, b) = x.get<double>();
                }
            }
            if (ok) cfg.V = m;
        } else {
            errors.push_back("V: expected \"identity\" or a matrix");
        }
    }
    if (j.contains("prior")) {
        const Json& pj = j["prior"];
        if (pj.is_string()) {
            cfg.prior = pj.get<std::string>();
            if (cfg.prior != "flat") errors.push_back("prior: a string prior must be \"flat\"");
        } else if (pj.is_object()) {
            r.known_keys(pj, {"kind", "mean", "sd"}, "prior");
            if (pj.contains("kind")) {
                if (auto s = r.string(pj["kind"], "prior.kind")) cfg.prior = *s;
            }
            if (cfg.prior == "normal") {
                if (!pj.contains("mean") || !pj.contains("sd")) errors.push_back("prior: normal needs mean and sd");
                if (pj.contains("mean")) cfg.prior_mean = r.vector(pj["mean"], "prior.mean");
                if (pj.contains("sd")) cfg.prior_sd = r.vector(pj["sd"], "prior.sd");
            } else if (cfg.prior != "flat") {
                errors.push_back("prior.kind: expected flat or normal");
            }
        } else {
            errors.push_back("prior: expected \"flat\" or an object");
        }
    }
    if (j.contains("box")) {
        const Json& bj = j["box"];
        if (!bj.is_object() || !bj.contains("lower") || !bj.contains("upper")) {
            errors.push_back("box: expected {\"lower\": [...], \"upper\": [...]}");
        } else {
            r.known_keys(bj, {"lower", "upper"}, "box");
            cfg.box_lower = r.vector(bj["lower"], "box.lower");
            cfg.box_upper = r.vector(bj["upper"], "box.upper");
            if (cfg.box_lower && cfg.box_upper) {
                if (cfg.box_lower->size() != cfg.box_upper->size()) {
                    errors.push_back("box: lower and upper differ in length");
                } else if ((cfg.box_lower->array() >= cfg.box_upper->array()).any()) {
                    errors.push_back("box: every lower bound must be below its upper bound");
                }
            }
        }
    }
    const Index dim = cfg.box_lower ? cfg.box_lower->size() : 0;
    if (j.contains("sampler")) {
        const Json& sj = j["sampler"];
        if (!sj.is_object()) {
            errors.push_back("sampler: expected an object");
        } else {
            r.known_keys(sj, {"B", "burn_in", "proposal_sd", "init"}, "sampler");
            if (sj.contains("B")) {
                if (auto v = r.integer(sj["B"], "sampler.B")) {
                    if (*v < 1) errors.push_back("sampler.B: must be >= 1");
                    cfg.sampler.B = *v;
                }
            }
            if (sj.contains("burn_in")) {
                if (auto v = r.integer(sj["burn_in"], "sampler.burn_in")) {
                    if (*v < 0) errors.push_back("sampler.burn_in: must be >= 0");
                    cfg.sampler.burn_in = *v;
                }
            }
            if (sj.contains("proposal_sd")) {
                cfg.sampler.proposal_sd = r.vector(sj["proposal_sd"], "sampler.proposal_sd", dim);
                if (cfg.sampler.proposal_sd && (cfg.sampler.proposal_sd->array() <= 0.0).any()) {
                    errors.push_back("sampler.proposal_sd: must be positive");
                }
            }
            if (sj.contains("init")) cfg.sampler.init = r.vector(sj["init"], "sampler.init", dim);
        }
    }
    if (j.contains("estimator")) {
        const Json& ej = j["estimator"];
        if (!ej.is_object()) {
            errors.push_back("estimator: expected an object");
        } else {
            r.known_keys(ej, {"pi", "epsilon", "grid_spacing"}, "estimator");
            if (ej.contains("pi")) {
                cfg.estimator.pi_rules.clear();
                const Json list = ej["pi"].is_array() ? ej["pi"] : Json::array({ej["pi"]});
                for (const auto& x : list) {
                    std::string rule = x.is_number() ? format_double(x.get<double>()) : "";
                    if (x.is_string()) rule = x.get<std::string>();
                    try {
                        const double v = pi_rule_value(rule, 1000);
                        if (!(v > 0.0 && v < 0.5)) errors.push_back("estimator.pi: values must lie in (0, 0.5)");
                        cfg.estimator.pi_rules.push_back(rule);
                    } catch (const Error& e) {
                        errors.push_back(std::string("estimator.pi: ") + e.what());
                    }
                }
            }
            if (ej.contains("epsilon")) {
                cfg.estimator.epsilon_kinds.clear();
                const Json list = ej["epsilon"].is_array() ? ej["epsilon"] : Json::array({ej["epsilon"]});
                for (const auto& x : list) {
                    try {
                        cfg.estimator.epsilon_kinds.push_back(parse_epsilon_kind(x.get<std::string>()));
                    } catch (const std::exception& e) {
                        errors.push_back(std::string("estimator.epsilon: ") + e.what());
                    }
                }
            }
            if (ej.contains("grid_spacing")) {
                if (auto v = r.number(ej["grid_spacing"], "estimator.grid_spacing")) {
                    if (!(*v > 0.0)) errors.push_back("estimator.grid_spacing: must be positive");
                    cfg.estimator.grid_spacing = *v;
                }
            }
        }
    }
    if (j.contains("selection")) {
        const Json& sj = j["selection"];
        if (!sj.is_object()) {
            errors.push_back("selection: expected an object");
        } else {
            r.known_keys(sj,
                         {"approach", "alpha", "sigma_n2", "candidate_prior", "moment_subsets", "free_masks",
                          "mc_samples"},
                         "selection");
            if (experiment == "custom") cfg.run_selection = true;
            if (sj.contains("approach")) {
                if (auto s = r.string(sj["approach"], "selection.approach")) {
                    if (*s != "A1" && *s != "A2") errors.push_back("selection.approach: expected A1 or A2");
                    cfg.selection.approach = *s;
                }
            }
            if (sj.contains("alpha")) {
                if (auto v = r.number(sj["alpha"], "selection.alpha")) {
                    if (!(*v > 0.0)) errors.push_back("selection.alpha: must be positive");
                    cfg.selection.alpha = *v;
                }
            }
            if (sj.contains("sigma_n2")) {
                const Json& x = sj["sigma_n2"];
                const std::string rule = x.is_number() ? format_double(x.get<double>())
                                                       : (x.is_string() ? x.get<std::string>() : "");
                try {
                    sigma_n2_value(rule, 100);
                    cfg.selection.sigma_n2 = rule;
                } catch (const Error& e) {
                    errors.push_back(std::string("selection.sigma_n2: ") + e.what());
                }
            }
            if (sj.contains("candidate_prior")) {
                if (auto s = r.string(sj["candidate_prior"], "selection.candidate_prior")) {
                    if (*s == "exponential") {
                        errors.push_back("selection.candidate_prior: exponential candidate priors are not "
                                         "supported; use default, uniform or power");
                    } else if (*s != "default" && *s != "uniform" && *s != "power") {
                        errors.push_back("selection.candidate_prior: expected default, uniform or power");
                    }
                    cfg.selection.candidate_prior = *s;
                }
            }
            if (sj.contains("moment_subsets")) {
                if (auto v = r.index_sets(sj["moment_subsets"], "selection.moment_subsets")) {
                    cfg.selection.constraints.moment_subsets = *v;
                }
            }
            if (sj.contains("free_masks")) {
                if (auto v = r.index_sets(sj["free_masks"], "selection.free_masks")) {
                    cfg.selection.constraints.free_masks = *v;
                }
            }
            if (sj.contains("mc_samples")) {
                if (auto v = r.integer(sj["mc_samples"], "selection.mc_samples")) {
                    if (*v < 2) errors.push_back("selection.mc_samples: must be >= 2");
                    cfg.selection.mc_samples = static_cast<int>(*v);
                }
            }
        }
    }
    if (j.contains("model")) {
        const Json& mj = j["model"];
        if (!mj.is_object() || !mj.contains("kind") || !mj["kind"].is_string()) {
            errors.push_back("model: expected an object with a kind");
        } else {
            r.known_keys(mj, {"kind", "instruments", "regressors", "bounds"}, "model");
            ModelSpec spec;
            spec.kind = mj["kind"].get<std::string>();
            if (spec.kind == "interval_regression") {
                if (auto v = mj.contains("instruments") ? r.integer(mj["instruments"], "model.instruments")
                                                        : std::optional<Index>{}) {
                    spec.instruments = static_cast<int>(*v);
                }
                if (auto v = mj.contains("regressors") ? r.integer(mj["regressors"], "model.regressors")
                                                       : std::optional<Index>{}) {
                    spec.regressors = static_cast<int>(*v);
                }
                if (spec.instruments < 1 || spec.regressors < 1) {
                    errors.push_back("model: interval_regression needs instruments >= 1 and regressors >= 1");
                }
            } else if (spec.kind == "bounds") {
                if (!mj.contains("bounds") || !mj["bounds"].is_array() || mj["bounds"].empty()) {
                    errors.push_back("model.bounds: expected a non-empty list");
                } else {
                    for (const auto& b : mj["bounds"]) {
                        if (!b.is_object() || !b.contains("column") || !b.contains("side") ||
                            !b["column"].is_string() || !b["side"].is_string()) {
                            errors.push_back("model.bounds: entries need column and side");
                            continue;
                        }
                        const auto side = b["side"].get<std::string>();
                        if (side != "upper" && side != "lower") {
                            errors.push_back("model.bounds: side must be upper or lower");
                            continue;
                        }
                        spec.bounds.push_back(
                            {b["column"].get<std::string>(), side == "upper" ? BoundSide::upper : BoundSide::lower});
                    }
                }
            } else if (spec.kind != "interval_mean" && spec.kind != "missing_data") {
                errors.push_back("model.kind: expected interval_mean, missing_data, interval_regression or bounds");
            }
            cfg.model = spec;
        }
    }
    if (j.contains("data")) {
        if (auto s = r.string(j["data"], "data")) cfg.data = *s;
    }
    if (j.contains("output_dir")) {
        if (auto s = r.string(j["output_dir"], "output_dir")) cfg.output_dir = *s;
    }
    if (j.contains("tasks")) {
        const Json& tj = j["tasks"];
        if (!tj.is_array()) {
            errors.push_back("tasks: expected a list containing estimate and/or select");
        } else {
            cfg.run_estimation = false;
            cfg.run_selection = false;
            for (const auto& t : tj) {
                const std::string s = t.is_string() ? t.get<std::string>() : "";
                if (s == "estimate") {
                    cfg.run_estimation = true;
                } else if (s == "select") {
                    cfg.run_selection = true;
                } else {
                    errors.push_back("tasks: unknown task '" + s + "'");
                }
            }
        }
    }

    if (experiment == "custom") {
        if (!cfg.data) errors.push_back("custom experiment needs data (CSV path)");
        if (!cfg.model) errors.push_back("custom experiment needs a model");
        if (!cfg.box_lower) errors.push_back("custom experiment needs a box");
    } else {
        if (cfg.model) errors.push_back("model: only custom experiments take a model");
        if (cfg.data) errors.push_back("data: only custom experiments read a CSV");
        if (cfg.n.empty()) errors.push_back("n: at least one sample size is needed");
    }
    if (cfg.model && cfg.box_lower && errors.empty()) {
        try {
            const auto model = build_model(*cfg.model);
            if (model.d() != dim) errors.push_back("box: dimension does not match the model");
            if (cfg.psi && cfg.psi->size() != model.p()) errors.push_back("psi: length does not match the model");
        } catch (const Error& e) {
            errors.push_back(std::string("model: ") + e.what());
        }
    }
    if (dim > 0) {
        if (cfg.sampler.init && cfg.sampler.init->size() != dim) errors.push_back("sampler.init: wrong length");
        if (cfg.sampler.proposal_sd && cfg.sampler.proposal_sd->size() != dim) {
            errors.push_back("sampler.proposal_sd: wrong length");
        }
        if (cfg.prior == "normal" && cfg.prior_mean && cfg.prior_sd &&
            (cfg.prior_mean->size() != dim || cfg.prior_sd->size() != dim)) {
            errors.push_back("prior: mean and sd must match the box dimension");
        }
    }
    if (cfg.V && cfg.psi && cfg.V->rows() != cfg.psi->size()) errors.push_back("V: size does not match psi");
    if (!errors.empty()) throw Error(join_errors(errors));
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open configuration " + path.string());
    Json j;
    try {
        j = Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw Error("configuration " + path.string() + " is not valid JSON: " + e.what());
    }
    return parse_config(j);
}

Json config_to_json(const ExperimentConfig& cfg) {
    Json j;
    j["experiment"] = cfg.experiment;
    j["n"] = cfg.n;
    j["seed"] = cfg.seed;
    if (cfg.psi) j["psi"] = vec_json(*cfg.psi);
    if (cfg.V) {
        Json m = Json::array();
        for (Index a = 0; a < cfg.V->rows(); ++a) m.push_back(vec_json(cfg.V->row(a).transpose()));
        j["V"] = m;
    } else {
        j["V"] = "identity";
    }
    if (cfg.prior == "normal" && cfg.prior_mean && cfg.prior_sd) {
        j["prior"] = {{"kind", "normal"}, {"mean", vec_json(*cfg.prior_mean)}, {"sd", vec_json(*cfg.prior_sd)}};
    } else {
        j["prior"] = cfg.prior;
    }
    if (cfg.box_lower && cfg.box_upper) j["box"] = {{"lower", vec_json(*cfg.box_lower)}, {"upper", vec_json(*cfg.box_upper)}};
    Json s{{"B", cfg.sampler.B}};
    if (cfg.sampler.burn_in) s["burn_in"] = *cfg.sampler.burn_in;
    if (cfg.sampler.proposal_sd) s["proposal_sd"] = vec_json(*cfg.sampler.proposal_sd);
    if (cfg.sampler.init) s["init"] = vec_json(*cfg.sampler.init);
    j["sampler"] = s;
    Json eps = Json::array();
    for (auto k : cfg.estimator.epsilon_kinds) eps.push_back(to_string(k));
    j["estimator"] = {{"pi", cfg.estimator.pi_rules}, {"epsilon", eps}, {"grid_spacing", cfg.estimator.grid_spacing}};
    j["selection"] = {{"approach", cfg.selection.approach},
                      {"alpha", cfg.selection.alpha},
                      {"sigma_n2", cfg.selection.sigma_n2},
                      {"candidate_prior", cfg.selection.candidate_prior},
                      {"moment_subsets", sets_json(cfg.selection.constraints.moment_subsets)},
                      {"free_masks", sets_json(cfg.selection.constraints.free_masks)},
                      {"mc_samples", cfg.selection.mc_samples}};
    if (cfg.model) {
        Json m{{"kind", cfg.model->kind}};
        if (cfg.model->kind == "interval_regression") {
            m["instruments"] = cfg.model->instruments;
            m["regressors"] = cfg.model->regressors;
        }
        if (cfg.model->kind == "bounds") {
            Json b = Json::array();
            for (const auto& x : cfg.model->bounds) {
                b.push_back({{"column", x.column}, {"side", x.side == BoundSide::upper ? "upper" : "lower"}});
            }
            m["bounds"] = b;
        }
        j["model"] = m;
    }
    if (cfg.data) j["data"] = *cfg.data;
    j["output_dir"] = cfg.output_dir.string();
    Json tasks = Json::array();
    if (cfg.run_estimation) tasks.push_back("estimate");
    if (cfg.run_selection) tasks.push_back("select");
    j["tasks"] = tasks;
    return j;
}

SeedSet derive_seeds(std::uint64_t seed, std::size_t cell) {
    const std::uint64_t base = splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(cell)));
    return {splitmix64(base + 1), splitmix64(base + 2), splitmix64(base + 3)};
}

std::filesystem::path resolve_output_dir(const ExperimentConfig& cfg) {
    if (const char* env = std::getenv("MIB_OUTPUT_DIR"); env != nullptr && *env != '\0') return env;
    return cfg.output_dir;
}

void emit_density_curve(const std::filesystem::path& path, const LogLikelihoodContext& ctx, const ThetaPrior& prior,
                        const std::vector<double>& grid) {
    if (ctx.dim() != 1) throw DimensionError("density curves need a one-dimensional parameter");
    if (grid.empty()) throw Error("density grid is empty");
    std::vector<double> lp(grid.size());
    double top = kNegInf;
    Vector theta(1);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        theta[0] = grid[i];
        lp[i] = log_posterior_unnorm(ctx, prior, theta);
        top = std::max(top, lp[i]);
    }
    if (top == kNegInf) throw Error("posterior is zero on the whole density grid");
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < grid.size(); ++i) rows.push_back({grid[i], std::exp(lp[i] - top)});
    write_table(path, {"theta", "density"}, rows);
}

// ---------------------------------------------------------------------------
// Runs

RunSummary run_experiment(const ExperimentConfig& cfg) {
    const auto dir = resolve_output_dir(cfg);
    std::filesystem::create_directories(dir);
    RunSummary summary;
    write_json(dir / "config.json", config_to_json(cfg));

    if (cfg.experiment == "custom") {
        const auto model = build_model(*cfg.model);
        const Dataset data = load_dataset(*cfg.data);
        const ThetaBox box = config_box(cfg);
        const auto hyper = config_hyper(cfg, model.p());
        const auto seeds = derive_seeds(cfg.seed, 0);
        const std::string tag = cell_tag(data.n());
        if (cfg.run_estimation) {
            const LogLikelihoodContext ctx(model, data, hyper);
            const ThetaPrior prior = config_prior(cfg, box);
            const LogDensity target = [&](const Vector& t) { return log_posterior_unnorm(ctx, prior, t); };
            estimation_outputs(cfg, dir, tag, target, box, data.n(), seeds.chain, theta_labels(box.dim()), summary);
        }
        if (cfg.run_selection) {
            selection_outputs(cfg, dir, tag, model, data, hyper, box, seeds.integration,
                              run_metadata(cfg, data.n(), seeds), summary);
        }
        return summary;
    }

    const ThetaBox box = config_box(cfg);
    std::vector<std::vector<std::string>> table1;
    std::vector<std::vector<std::string>> table2;
    for (std::size_t cell = 0; cell < cfg.n.size(); ++cell) {
        const Index n = cfg.n[cell];
        const auto seeds = derive_seeds(cfg.seed, cell);
        const std::string tag = cell_tag(n);
        Json meta = run_metadata(cfg, n, seeds);

        if (cfg.experiment == "ex51") {
            const Dataset data = gen_example_5_1(n, seeds.data);
            const auto model = example_5_1_model();
            const auto hyper = config_hyper(cfg, model.p());
            const LogLikelihoodContext ctx(model, data, hyper);
            const ThetaPrior prior = config_prior(cfg, box);
            if (cfg.run_estimation) {
                const LogDensity target = [&](const Vector& t) { return log_posterior_unnorm(ctx, prior, t); };
                for (const auto kind : cfg.estimator.epsilon_kinds) {
                    const double eps = epsilon_schedule(n, kind);
                    const auto region = level_set_region(target, box, eps, GridSpec{cfg.estimator.grid_spacing});
                    const double a = region.hull_lower[0];
                    const double b = region.hull_upper[0];
                    table1.push_back({std::to_string(n), to_string(kind), fmt(eps), fmt(a), fmt(b),
                                      fmt(a * a + (b - 5.0) * (b - 5.0))});
                }
                const Chain chain = run_chain(cfg, target, box, seeds.chain);
                write_chain(dir / ("chain_" + tag + ".csv"), chain, {"theta"});
                write_json(dir / ("chain_" + tag + ".json"), chain_metadata(chain));
                for (const auto& rule : cfg.estimator.pi_rules) {
                    const double pi = pi_rule_value(rule, n);
                    const auto est = quantile_set_estimate(chain, coordinate(0), pi);
                    table2.push_back({std::to_string(n), rule, fmt(pi), fmt(est.lower), fmt(est.upper),
                                      fmt(est.lower * est.lower + (est.upper - 5.0) * (est.upper - 5.0))});
                }
                const auto grid = linspace(box.lower()[0], box.upper()[0], 0.01);
                emit_density_curve(dir / ("density_flat_" + tag + ".csv"), ctx, ThetaPrior::flat(box), grid);
                emit_density_curve(dir / ("density_normal_" + tag + ".csv"), ctx,
                                   ThetaPrior::normal(Vector::Zero(1), Vector::Constant(1, 0.5), box), grid);
                summary.files.push_back(dir / ("density_flat_" + tag + ".csv"));
            }
            if (cfg.run_selection) {
                selection_outputs(cfg, dir, tag, model, data, hyper, box, seeds.integration, meta, summary);
            }
        } else if (cfg.experiment == "ex52") {
            const Dataset data = gen_example_5_2(n, seeds.data);
            const auto model = example_5_2_model();
            const auto hyper = config_hyper(cfg, model.p());
            const LogLikelihoodContext ctx(model, data, hyper);
            if (cfg.run_estimation) {
                const ThetaPrior flat = config_prior(cfg, box);
                const ThetaPrior informative = ThetaPrior::normal((Vector(2) << 10.0, -6.0).finished(),
                                                                  Vector::Constant(2, 12.0), box);
                const LogDensity target = [&](const Vector& t) { return log_posterior_unnorm(ctx, flat, t); };
                const LogDensity target2 = [&](const Vector& t) { return log_posterior_unnorm(ctx, informative, t); };
                const Chain c1 = run_chain(cfg, target, box, seeds.chain);
                const Chain c2 = run_chain(cfg, target2, box, seeds.chain);
                write_chain(dir / ("chain_flat_" + tag + ".csv"), c1);
                write_chain(dir / ("chain_prior51_" + tag + ".csv"), c2);
                summary.files.push_back(dir / ("chain_flat_" + tag + ".csv"));
                summary.files.push_back(dir / ("chain_prior51_" + tag + ".csv"));

                auto describe = [](const Chain& c) {
                    Index near = 0;
                    for (Index b = 0; b < c.size(); ++b) {
                        if (example_5_2_distance(c.draws.row(b).transpose()) <= 0.15) ++near;
                    }
                    Json d = chain_metadata(c);
                    d["centroid"] = vec_json(c.draws.colwise().mean().transpose());
                    d["fraction_within_0.15"] = static_cast<double>(near) / static_cast<double>(c.size());
                    return d;
                };
                meta["chain_flat"] = describe(c1);
                meta["chain_prior51"] = describe(c2);

                for (const auto kind : cfg.estimator.epsilon_kinds) {
                    const auto region =
                        level_set_region(target, box, epsilon_schedule(n, kind), GridSpec{cfg.estimator.grid_spacing});
                    const auto path = dir / ("levelset_" + to_string(kind) + "_" + tag + ".csv");
                    write_level_set(path, region);
                    meta["levelset_" + to_string(kind)] = level_set_metadata(region);
                    summary.files.push_back(path);
                }
                std::vector<std::vector<std::string>> rows;
                const auto stated = example_5_2_stated_region();
                const auto implied = example_5_2_implied_region(data);
                for (std::size_t l = 0; l < stated.size(); ++l) {
                    const auto& s = stated[l];
                    const auto& m = implied[l];
                    rows.push_back({"stated", std::to_string(l + 1), fmt(s.a1), fmt(s.a2), fmt(s.lo), fmt(s.hi)});
                    rows.push_back({"sample", std::to_string(l + 1), fmt(m.a1), fmt(m.a2), fmt(m.lo), fmt(m.hi)});
                }
                write_rows(dir / ("boundary_" + tag + ".csv"), {"source", "instrument", "a1", "a2", "lower", "upper"},
                           rows);
                summary.files.push_back(dir / ("boundary_" + tag + ".csv"));
            }
            if (cfg.run_selection) {
                selection_outputs(cfg, dir, tag, model, data, hyper, box, seeds.integration, meta, summary);
            }
            write_json(dir / ("summary_" + tag + ".json"), meta);
        } else if (cfg.experiment == "ex53") {
            const Dataset data = gen_example_5_3(n, seeds.data);
            const auto model = example_5_3_model();
            const auto hyper = config_hyper(cfg, model.p());
            if (cfg.run_estimation) {
                const LogLikelihoodContext ctx(model, data, hyper);
                const ThetaPrior prior = config_prior(cfg, box);
                const LogDensity target = [&](const Vector& t) { return log_posterior_unnorm(ctx, prior, t); };
                estimation_outputs(cfg, dir, tag, target, box, n, seeds.chain, {"theta"}, summary);
            }
            if (cfg.run_selection) {
                selection_outputs(cfg, dir, tag, model, data, hyper, box, seeds.integration, meta, summary);
            }
        }
    }
    if (!table1.empty()) {
        write_rows(dir / "table1.csv", {"n", "epsilon_kind", "epsilon", "lower", "upper", "gamma"}, table1);
        summary.files.push_back(dir / "table1.csv");
    }
    if (!table2.empty()) {
        write_rows(dir / "table2.csv", {"n", "pi_rule", "pi", "lower", "upper", "gamma"}, table2);
        summary.files.push_back(dir / "table2.csv");
    }
    return summary;
}

} // namespace mib
