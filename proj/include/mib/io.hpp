#pragma once

#include "mib/core.hpp"
#include "mib/mcmc.hpp"
#include "mib/selection.hpp"
#include "mib/setestim.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace mib {

using Json = nlohmann::ordered_json;

/// Reads a comma-separated file with a header row. When `schema` is
/// non-empty the header must list exactly those names in that order.
Dataset load_dataset(const std::filesystem::path& path, const std::vector<std::string>& schema = {});

/// Shortest round-trip-safe text for a double ("%.17g").
std::string format_double(double x);

void write_dataset(const std::filesystem::path& path, const Dataset& data);

/// Generic numeric table.
void write_table(const std::filesystem::path& path, const std::vector<std::string>& header,
                 const std::vector<std::vector<double>>& rows);

/// Table of preformatted cells.
void write_rows(const std::filesystem::path& path, const std::vector<std::string>& header,
                const std::vector<std::vector<std::string>>& rows);

/// Pretty-printed JSON with a trailing newline.
void write_json(const std::filesystem::path& path, const Json& value);

/// One row per draw: theta components then log_post.
void write_chain(const std::filesystem::path& csv, const Chain& chain, const std::vector<std::string>& names = {});
Json chain_metadata(const Chain& chain);

void write_level_set(const std::filesystem::path& csv, const LevelSetRegion& region,
                     const std::vector<std::string>& names = {});
Json level_set_metadata(const LevelSetRegion& region);

/// moment_subset, free_mask, log_evidence, log_prior, posterior_weight;
/// rows sorted by weight, descending (ties by combination order).
void write_selection_report(const std::filesystem::path& csv, const CandidatePosterior& post);
Json selection_metadata(const CandidatePosterior& post);

} // namespace mib
