#pragma once

#include "mib/core.hpp"

#include <filesystem>
#include <fstream>
#include <random>
#include <string>

namespace testutil {

inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("mibayes-tests-" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

inline std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Two-column data whose column means are exactly (mean1, mean2).
inline mib::Dataset interval_data(double mean1, double mean2, mib::Index n) {
    mib::Matrix v(n, 2);
    for (mib::Index i = 0; i < n; ++i) {
        const double e = (i % 2 == 0) ? 0.05 : -0.05;
        v(i, 0) = mean1 + e;
        v(i, 1) = mean2 - e;
    }
    if (n % 2 == 1) {
        v(n - 1, 0) = mean1;
        v(n - 1, 1) = mean2;
    }
    return mib::Dataset(v, {"y1", "y2"});
}

inline mib::Matrix random_spd(std::mt19937_64& rng, mib::Index p) {
    std::normal_distribution<double> z(0.0, 1.0);
    mib::Matrix a(p, p);
    for (mib::Index i = 0; i < p; ++i) {
        for (mib::Index j = 0; j < p; ++j) a(i, j) = z(rng);
    }
    mib::Matrix s = a * a.transpose() + 0.5 * mib::Matrix::Identity(p, p);
    return 0.5 * (s + s.transpose());
}

} // namespace testutil
