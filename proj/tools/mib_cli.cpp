#include "mib/experiments.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

namespace {

using mib::Json;

/// "1,2;3,4" -> [[1,2],[3,4]]
Json number_rows(const std::string& text) {
    Json rows = Json::array();
    std::istringstream in(text);
    std::string row;
    while (std::getline(in, row, ';')) {
        Json r = Json::array();
        std::istringstream rs(row);
        std::string cell;
        while (std::getline(rs, cell, ',')) {
            std::size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(cell, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used == 0) throw mib::Error("cannot read '" + cell + "' as a number");
            r.push_back(v);
        }
        rows.push_back(r);
    }
    return rows;
}

/// "1 2;3" -> [[1,2],[3]]
Json index_rows(const std::string& text) {
    Json rows = Json::array();
    std::istringstream in(text);
    std::string row;
    while (std::getline(in, row, ';')) {
        Json r = Json::array();
        std::istringstream rs(row);
        long v = 0;
        while (rs >> v) r.push_back(v);
        if (!rs.eof()) throw mib::Error("cannot read index list '" + row + "'");
        rows.push_back(r);
    }
    return rows;
}

/// Flags shared by run, estimate and select. Each one that is given
/// overrides the matching configuration key.
struct Overrides {
    std::string config;
    std::string experiment;
    std::vector<long> n;
    std::optional<std::uint64_t> seed;
    std::vector<double> psi;
    std::string V;
    std::string prior;
    std::vector<double> prior_mean, prior_sd, box_lower, box_upper;
    std::optional<long> B, burn_in;
    std::vector<double> proposal_sd, init;
    std::vector<std::string> pi, epsilon;
    std::optional<double> grid_spacing;
    std::string approach;
    std::optional<double> alpha;
    std::string sigma_n2, candidate_prior, moment_subsets, free_masks;
    std::optional<long> mc_samples;
    std::string model;
    std::optional<long> instruments, regressors;
    std::vector<std::string> bounds;
    std::string data;
    std::string output_dir;

    void attach(CLI::App* app) {
        app->add_option("-c,--config", config, "JSON configuration file")->check(CLI::ExistingFile);
        app->add_option("--experiment", experiment, "ex51, ex52, ex53 or custom");
        app->add_option("--n", n, "sample sizes")->delimiter(',');
        app->add_option("--seed", seed, "master seed");
        app->add_option("--psi", psi, "exponential prior rates")->delimiter(',');
        app->add_option("--V", V, "identity, or rows such as 1,0;0,1");
        app->add_option("--prior", prior, "flat or normal");
        app->add_option("--prior-mean", prior_mean)->delimiter(',');
        app->add_option("--prior-sd", prior_sd)->delimiter(',');
        app->add_option("--box-lower", box_lower)->delimiter(',');
        app->add_option("--box-upper", box_upper)->delimiter(',');
        app->add_option("--B", B, "retained draws");
        app->add_option("--burn-in", burn_in);
        app->add_option("--proposal-sd", proposal_sd)->delimiter(',');
        app->add_option("--init", init)->delimiter(',');
        app->add_option("--pi", pi, "quantile rules: 1/n, exp(-sqrt(n)), 1/log(n) or numbers")->delimiter(',');
        app->add_option("--epsilon", epsilon, "sqrt-n, log-n, loglog-n")->delimiter(',');
        app->add_option("--grid-spacing", grid_spacing);
        app->add_option("--approach", approach, "A1 or A2");
        app->add_option("--alpha", alpha);
        app->add_option("--sigma-n2", sigma_n2, "n, n^2 or a number");
        app->add_option("--candidate-prior", candidate_prior, "default, uniform or power");
        app->add_option("--moment-subsets", moment_subsets, "allowed moment sets, e.g. \"2 3 4;2 3\"");
        app->add_option("--free-masks", free_masks, "allowed free-parameter sets, e.g. \"1;1 2\"");
        app->add_option("--mc-samples", mc_samples);
        app->add_option("--model", model, "interval_mean, missing_data, interval_regression or bounds");
        app->add_option("--instruments", instruments);
        app->add_option("--regressors", regressors);
        app->add_option("--bound", bounds, "column:upper or column:lower (bounds model)");
        app->add_option("--data", data, "CSV input (custom experiments)");
        app->add_option("-o,--output-dir", output_dir);
    }

    Json build(const std::string& default_experiment) const {
        Json j = Json::object();
        if (!config.empty()) {
            std::ifstream in(config);
            try {
                j = Json::parse(in);
            } catch (const Json::parse_error& e) {
                throw mib::Error("configuration " + config + " is not valid JSON: " + e.what());
            }
        }
        if (!experiment.empty()) {
            j["experiment"] = experiment;
        } else if (!j.contains("experiment") && !default_experiment.empty()) {
            j["experiment"] = default_experiment;
        }
        if (!n.empty()) j["n"] = n;
        if (seed) j["seed"] = *seed;
        if (!psi.empty()) j["psi"] = psi;
        if (!V.empty()) j["V"] = V == "identity" ? Json(V) : number_rows(V);
        if (!prior.empty() || !prior_mean.empty() || !prior_sd.empty()) {
            Json p{{"kind", prior.empty() ? "normal" : prior}};
            if (!prior_mean.empty()) p["mean"] = prior_mean;
            if (!prior_sd.empty()) p["sd"] = prior_sd;
            j["prior"] = p;
        }
        if (!box_lower.empty() || !box_upper.empty()) {
            Json b = j.contains("box") && j["box"].is_object() ? j["box"] : Json::object();
            if (!box_lower.empty()) b["lower"] = box_lower;
            if (!box_upper.empty()) b["upper"] = box_upper;
            j["box"] = b;
        }
        auto section = [&j](const char* key) -> Json& {
            if (!j.contains(key) || !j[key].is_object()) j[key] = Json::object();
            return j[key];
        };
        if (B) section("sampler")["B"] = *B;
        if (burn_in) section("sampler")["burn_in"] = *burn_in;
        if (!proposal_sd.empty()) section("sampler")["proposal_sd"] = proposal_sd;
        if (!init.empty()) section("sampler")["init"] = init;
        if (!pi.empty()) section("estimator")["pi"] = pi;
        if (!epsilon.empty()) section("estimator")["epsilon"] = epsilon;
        if (grid_spacing) section("estimator")["grid_spacing"] = *grid_spacing;
        if (!approach.empty()) section("selection")["approach"] = approach;
        if (alpha) section("selection")["alpha"] = *alpha;
        if (!sigma_n2.empty()) section("selection")["sigma_n2"] = sigma_n2;
        if (!candidate_prior.empty()) section("selection")["candidate_prior"] = candidate_prior;
        if (!moment_subsets.empty()) section("selection")["moment_subsets"] = index_rows(moment_subsets);
        if (!free_masks.empty()) section("selection")["free_masks"] = index_rows(free_masks);
        if (mc_samples) section("selection")["mc_samples"] = *mc_samples;
        if (!model.empty()) section("model")["kind"] = model;
        if (instruments) section("model")["instruments"] = *instruments;
        if (regressors) section("model")["regressors"] = *regressors;
        if (!bounds.empty()) {
            Json list = Json::array();
            for (const auto& b : bounds) {
                const auto colon = b.rfind(':');
                if (colon == std::string::npos) throw mib::Error("--bound expects column:side, got '" + b + "'");
                list.push_back({{"column", b.substr(0, colon)}, {"side", b.substr(colon + 1)}});
            }
            section("model")["bounds"] = list;
        }
        if (!data.empty()) j["data"] = data;
        if (!output_dir.empty()) j["output_dir"] = output_dir;
        return j;
    }
};

mib::Dataset generate(const std::string& design, mib::Index n, std::uint64_t seed) {
    if (design == "ex51") return mib::gen_example_5_1(n, seed);
    if (design == "ex52") return mib::gen_example_5_2(n, seed);
    if (design == "ex53") return mib::gen_example_5_3(n, seed);
    if (design == "ex41") return mib::gen_example_4_1(n, seed);
    throw mib::Error("unknown design '" + design + "' (expected ex51, ex52, ex53 or ex41)");
}

int run_config(const Json& j) {
    const auto cfg = mib::parse_config(j);
    const auto summary = mib::run_experiment(cfg);
    std::cout << "output directory: " << mib::resolve_output_dir(cfg).string() << '\n';
    for (const auto& f : summary.files) std::cout << f.string() << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bayesian inference for moment inequality models"};
    app.require_subcommand(1);

    std::string design;
    long gen_n = 500;
    std::uint64_t gen_seed = 1;
    std::string gen_out;
    auto* gen = app.add_subcommand("gen", "write a simulated dataset as CSV");
    gen->add_option("design", design, "ex51, ex52, ex53 or ex41")->required();
    gen->add_option("--n", gen_n, "rows")->check(CLI::PositiveNumber);
    gen->add_option("--seed", gen_seed);
    gen->add_option("-o,--out", gen_out, "output CSV")->required();

    Overrides run_opts, est_opts, sel_opts;
    auto* run = app.add_subcommand("run", "run an experiment (tables, chains, density and selection outputs)");
    run_opts.attach(run);
    auto* estimate = app.add_subcommand("estimate", "posterior sampling and set estimates only");
    est_opts.attach(estimate);
    auto* select = app.add_subcommand("select", "moment and model selection only");
    sel_opts.attach(select);

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            mib::write_dataset(gen_out, generate(design, gen_n, gen_seed));
            std::cout << gen_out << '\n';
            return 0;
        }
        if (run->parsed()) {
            if (run_opts.config.empty() && run_opts.experiment.empty()) {
                throw mib::Error("run needs --config or --experiment");
            }
            return run_config(run_opts.build(""));
        }
        if (estimate->parsed()) {
            Json j = est_opts.build("custom");
            j["tasks"] = {"estimate"};
            return run_config(j);
        }
        if (select->parsed()) {
            Json j = sel_opts.build("custom");
            j["tasks"] = {"select"};
            return run_config(j);
        }
    } catch (const std::exception& e) {
        std::cerr << "mib: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
