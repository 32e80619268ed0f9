#pragma once

// Shared helpers for the unit tests: small dataset builders and brute-force
// oracles that deliberately avoid the library's own algorithms.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "mlrel/datasets.hpp"

namespace mlrel::testing {

inline LabeledDataset make_dataset(std::size_t dim, std::vector<std::vector<double>> pts,
                                   std::vector<ClassId> labels) {
    std::vector<double> flat;
    for (const auto& p : pts) flat.insert(flat.end(), p.begin(), p.end());
    return LabeledDataset(dim, std::move(flat), std::move(labels));
}

inline LabeledDataset random_dataset(std::mt19937_64& gen, std::size_t dim, std::size_t n,
                                     int classes) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<int> lab(0, classes - 1);
    std::vector<double> flat(dim * n);
    std::vector<ClassId> labels(n);
    for (auto& v : flat) v = u(gen);
    for (auto& l : labels) l = lab(gen);
    labels[0] = 0;
    labels[1] = 1;
    return LabeledDataset(dim, std::move(flat), std::move(labels));
}

inline double brute_distance(std::span<const double> a, std::span<const double> b, bool linf) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = std::abs(a[i] - b[i]);
        acc = linf ? std::max(acc, d) : acc + d * d;
    }
    return linf ? acc : std::sqrt(acc);
}

// O(n^2) minimum cross-label distance.
inline double brute_min_cross(const LabeledDataset& ds, bool linf) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < ds.size(); ++i)
        for (std::size_t j = i + 1; j < ds.size(); ++j)
            if (ds.label(i) != ds.label(j))
                best = std::min(best, brute_distance(ds.point(i), ds.point(j), linf));
    return best;
}

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path() /
               ("mlrel_test_" + std::to_string(std::random_device{}()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    std::filesystem::path operator/(const std::string& name) const { return path / name; }
};

}  // namespace mlrel::testing
