#include "mib/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace mib {

namespace {

std::vector<std::string> split_line(std::string line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        cells.push_back(line.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return cells;
}

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return {};
    const auto b = s.find_last_not_of(" \t");
    return s.substr(a, b - a + 1);
}

std::ofstream open_out(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    return out;
}

std::vector<std::string> theta_names(Index d, const std::vector<std::string>& names) {
    if (!names.empty()) {
        if (static_cast<Index>(names.size()) != d) throw DimensionError("column names do not match dimension");
        return names;
    }
    std::vector<std::string> out;
    for (Index j = 0; j < d; ++j) out.push_back("theta" + std::to_string(j + 1));
    return out;
}

Json vector_json(const Vector& v) {
    Json a = Json::array();
    for (Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

} // namespace

Dataset load_dataset(const std::filesystem::path& path, const std::vector<std::string>& schema) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path.string(), 0, 0);
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path.string() + ": missing header row", 0, 0);
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    std::vector<std::string> header = split_line(line);
    for (auto& h : header) h = trim(h);
    if (!schema.empty() && header != schema) {
        std::string want;
        for (const auto& s : schema) want += (want.empty() ? "" : ",") + s;
        throw ParseError(path.string() + ": header does not match expected columns " + want, 0, 0);
    }

    std::vector<double> cells;
    std::size_t row = 0;
    const std::size_t q = header.size();
    while (std::getline(in, line)) {
        if (trim(line).empty() || trim(line) == "\r") continue;
        ++row;
        const auto parts = split_line(line);
        if (parts.size() != q) {
            throw ParseError(path.string() + ": row " + std::to_string(row) + " has " + std::to_string(parts.size()) +
                                 " cells, expected " + std::to_string(q),
                             row, 0);
        }
        for (std::size_t c = 0; c < q; ++c) {
            const std::string cell = trim(parts[c]);
            double v = 0.0;
            const char* first = cell.data();
            const char* last = first + cell.size();
            if (first != last && *first == '+') ++first;
            const auto [ptr, ec] = std::from_chars(first, last, v);
            if (cell.empty() || ec != std::errc() || ptr != last || !std::isfinite(v)) {
                throw ParseError(path.string() + ": row " + std::to_string(row) + ", column '" + header[c] +
                                     "': '" + cell + "' is not a finite number",
                                 row, c + 1);
            }
            cells.push_back(v);
        }
    }
    if (row == 0) throw ParseError(path.string() + ": no data rows", 0, 0);
    Matrix values(static_cast<Index>(row), static_cast<Index>(q));
    for (std::size_t r = 0; r < row; ++r) {
        for (std::size_t c = 0; c < q; ++c) {
            values(static_cast<Index>(r), static_cast<Index>(c)) = cells[r * q + c];
        }
    }
    return Dataset(std::move(values), std::move(header));
}

std::string format_double(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

void write_dataset(const std::filesystem::path& path, const Dataset& data) {
    auto out = open_out(path);
    for (std::size_t c = 0; c < data.columns().size(); ++c) out << (c ? "," : "") << data.columns()[c];
    out << '\n';
    for (Index i = 0; i < data.n(); ++i) {
        for (Index c = 0; c < data.q(); ++c) out << (c ? "," : "") << format_double(data.values()(i, c));
        out << '\n';
    }
}

void write_table(const std::filesystem::path& path, const std::vector<std::string>& header,
                 const std::vector<std::vector<double>>& rows) {
    auto out = open_out(path);
    for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
    out << '\n';
    for (const auto& r : rows) {
        for (std::size_t c = 0; c < r.size(); ++c) out << (c ? "," : "") << format_double(r[c]);
        out << '\n';
    }
}

void write_rows(const std::filesystem::path& path, const std::vector<std::string>& header,
                const std::vector<std::vector<std::string>>& rows) {
    auto out = open_out(path);
    for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
    out << '\n';
    for (const auto& r : rows) {
        for (std::size_t c = 0; c < r.size(); ++c) out << (c ? "," : "") << r[c];
        out << '\n';
    }
}

void write_json(const std::filesystem::path& path, const Json& value) {
    auto out = open_out(path);
    out << value.dump(2) << '\n';
}

void write_chain(const std::filesystem::path& csv, const Chain& chain, const std::vector<std::string>& names) {
    auto out = open_out(csv);
    for (const auto& n : theta_names(chain.dim(), names)) out << n << ',';
    out << "log_post\n";
    for (Index b = 0; b < chain.size(); ++b) {
        for (Index j = 0; j < chain.dim(); ++j) out << format_double(chain.draws(b, j)) << ',';
        out << format_double(chain.log_post[b]) << '\n';
    }
}

Json chain_metadata(const Chain& chain) {
    return Json{{"seed", chain.seed},
                {"B", chain.size()},
                {"burn_in", chain.burn_in},
                {"acceptance_rate", chain.acceptance_rate}};
}

void write_level_set(const std::filesystem::path& csv, const LevelSetRegion& region,
                     const std::vector<std::string>& names) {
    auto out = open_out(csv);
    for (const auto& n : theta_names(region.points.cols(), names)) out << n << ',';
    out << "log_post\n";
    for (Index i = 0; i < region.points.rows(); ++i) {
        for (Index j = 0; j < region.points.cols(); ++j) out << format_double(region.points(i, j)) << ',';
        out << format_double(region.values[i]) << '\n';
    }
}

Json level_set_metadata(const LevelSetRegion& region) {
    Json j{{"epsilon_n", region.epsilon_n},
           {"max_log_post", region.max_log_post},
           {"argmax", vector_json(region.argmax_theta)},
           {"threshold", region.threshold},
           {"points", region.points.rows()},
           {"hull_lower", vector_json(region.hull_lower)},
           {"hull_upper", vector_json(region.hull_upper)}};
    if (region.spacing) j["grid_spacing"] = vector_json(*region.spacing);
    return j;
}

void write_selection_report(const std::filesystem::path& csv, const CandidatePosterior& post) {
    std::vector<std::size_t> order(post.candidates.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto& x = post.candidates[a];
        const auto& y = post.candidates[b];
        if (x.weight != y.weight) return x.weight > y.weight;
        return x.comb < y.comb;
    });
    auto out = open_out(csv);
    out << "moment_subset,free_mask,log_evidence,log_prior,posterior_weight\n";
    for (std::size_t i : order) {
        const auto& r = post.candidates[i];
        out << index_list(r.comb.moments) << ',' << index_list(r.comb.free) << ',' << format_double(r.log_evidence)
            << ',' << format_double(r.log_prior) << ',' << format_double(r.weight) << '\n';
    }
}

Json selection_metadata(const CandidatePosterior& post) {
    const auto& best = post.candidates.at(post.argmax);
    return Json{{"approach", post.approach},
                {post.approach == "A1" ? "alpha" : "sigma_n2", post.param},
                {"candidates", post.candidates.size()},
                {"argmax", {{"moment_subset", index_list(best.comb.moments)},
                            {"free_mask", index_list(best.comb.free)},
                            {"posterior_weight", best.weight}}}};
}

} // namespace mib
