#pragma once

#include "mib/core.hpp"
#include "mib/io.hpp"
#include "mib/likelihood.hpp"
#include "mib/selection.hpp"
#include "mib/setestim.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace mib {

// ---------------------------------------------------------------------------
// Simulation designs

/// Interval data: Y1 ~ N(0, 0.1), Y2 ~ N(5, 0.1), rows with y1 > y2 redrawn.
/// Columns y1, y2.
Dataset gen_example_5_1(Index n, std::uint64_t seed);

/// Interval regression with instruments: X ~ N2((1,1), I), Z1 = X1 + X2,
/// Z2 = X1 + 2 X2, Y1 ~ N(3, 0.1), Y2 ~ N(6, 0.1); rows with a negative
/// instrument are redrawn. Columns y1, y2, x1, x2, z1, z2.
Dataset gen_example_5_2(Index n, std::uint64_t seed);

/// Y1..Y4 ~ N(-1, 0.1), N(1, 0.1), N(2, 0.1), N(3, 0.1). Columns y1..y4.
Dataset gen_example_5_3(Index n, std::uint64_t seed);

/// Y = 0.9 X1 with X1 ~ U[-1, 1], X2 = 1, Z = (X1 + 1, 1),
/// Y1 = Y + 0.1 (U1 - 1), Y2 = Y + 0.1 (U2 + 1).
/// Columns y1, y2, x1, x2, z1, z2.
Dataset gen_example_4_1(Index n, std::uint64_t seed);

/// Moment models matching the generators above. The regression designs use
/// make_interval_regression_model(2, 2); the selection design has moments
/// (y1 - theta, theta - y2, theta - y3, y4 - theta).
MomentModel example_5_1_model();
MomentModel example_5_2_model();
MomentModel example_5_3_model();
MomentModel example_4_1_model();

/// Coefficients (a1, a2, lo, hi) of lo <= a1 theta1 + a2 theta2 <= hi for
/// each instrument, as stated for the Example 5.2 design.
struct Strip {
    double a1, a2, lo, hi;
};
std::vector<Strip> example_5_2_stated_region();

/// The same strips implied by averaged moments (population when `data` is
/// a large oracle sample), normalised so that a1 = 1 for the first strip
/// and a1 = 4 for the second.
std::vector<Strip> example_5_2_implied_region(const Dataset& data);

/// Euclidean distance from theta to the stated parallelogram (0 inside).
double example_5_2_distance(const Vector& theta);

// ---------------------------------------------------------------------------
// Experiment configuration

struct SamplerSpec {
    Index B = 5000;
    std::optional<Index> burn_in;     ///< default B / 10
    std::optional<Vector> proposal_sd;
    std::optional<Vector> init;
};

struct EstimatorSpec {
    std::vector<std::string> pi_rules{"1/n"};              ///< "1/n", "exp(-sqrt(n))", "1/log(n)" or a number
    std::vector<EpsilonKind> epsilon_kinds{EpsilonKind::loglog_n};
    double grid_spacing = 0.02;
};

struct SelectionSpec {
    std::string approach = "A2";       ///< "A1" or "A2"
    double alpha = 1.0;
    std::string sigma_n2 = "n^2";      ///< "n", "n^2" or a number
    std::string candidate_prior = "default"; ///< "default", "uniform", "power" or "exponential" (rejected)
    CandidateConstraints constraints;
    int mc_samples = 20000;
};

struct ModelSpec {
    std::string kind;                  ///< interval_mean, missing_data, interval_regression, bounds
    int instruments = 0;
    int regressors = 0;
    std::vector<Bound> bounds;
};

struct ExperimentConfig {
    std::string experiment = "ex51";   ///< ex51 | ex52 | ex53 | custom
    std::vector<Index> n{500};
    std::uint64_t seed = 1;
    std::optional<Vector> psi;
    std::optional<Matrix> V;           ///< identity when empty
    std::string prior = "flat";        ///< flat | normal
    std::optional<Vector> prior_mean;
    std::optional<Vector> prior_sd;
    std::optional<Vector> box_lower;
    std::optional<Vector> box_upper;
    SamplerSpec sampler;
    EstimatorSpec estimator;
    SelectionSpec selection;
    std::optional<ModelSpec> model;    ///< custom only
    std::optional<std::string> data;   ///< custom only: CSV path
    std::filesystem::path output_dir = "mib-output";
    bool run_selection = true;
    bool run_estimation = true;
};

/// Reads the JSON configuration described in docs/config.md. Every problem
/// found is listed in the thrown message.
ExperimentConfig parse_config(const Json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Echo of the effective configuration written next to the outputs.
Json config_to_json(const ExperimentConfig& cfg);

/// Defaults for the named experiment, before user overrides.
ExperimentConfig default_config(const std::string& experiment);

/// pi_n for a rule such as "1/n".
double pi_rule_value(const std::string& rule, Index n);

double sigma_n2_value(const std::string& rule, Index n);

MomentModel build_model(const ModelSpec& spec);

/// Seeds derived from cfg.seed for the data, chain and integration streams
/// of the i-th sample size.
struct SeedSet {
    std::uint64_t data;
    std::uint64_t chain;
    std::uint64_t integration;
};
SeedSet derive_seeds(std::uint64_t seed, std::size_t cell);

struct RunSummary {
    std::vector<std::filesystem::path> files;
};

/// Runs the configured experiment and writes its outputs below
/// cfg.output_dir (overridden by the MIB_OUTPUT_DIR environment variable).
RunSummary run_experiment(const ExperimentConfig& cfg);

std::filesystem::path resolve_output_dir(const ExperimentConfig& cfg);

/// Two columns (theta, posterior / max posterior) over `grid`.
void emit_density_curve(const std::filesystem::path& path, const LogLikelihoodContext& ctx, const ThetaPrior& prior,
                        const std::vector<double>& grid);

} // namespace mib
