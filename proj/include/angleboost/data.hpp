#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "angleboost/dataset.hpp"
#include "angleboost/rng.hpp"

namespace angleboost {

enum class GeneratorKind { waveform, four_class_gaussian };

struct GeneratorSpec {
    GeneratorKind kind = GeneratorKind::waveform;
    int n_train = 300;
    int n_test = 4700;
    std::uint64_t seed = 0;
};

/// Triangular waveform v_1(j) = max(6 - |j - 11|, 0) with its two shifts
/// v_2(j) = v_1(j - 4), v_3(j) = v_1(j + 4); j is 1-based.
inline double waveform_base(int which, int j) {
    switch (which) {
        case 1: return std::max(6.0 - std::abs(j - 11), 0.0);
        case 2: return std::max(6.0 - std::abs(j - 15), 0.0);
        case 3: return std::max(6.0 - std::abs(j - 7), 0.0);
        default: throw std::invalid_argument("waveform index must be 1, 2 or 3");
    }
}

/// Three-class waveform problem, 21 features. Each example mixes two of the
/// shifted triangles with a fresh Uniform(0,1) coefficient and adds unit
/// Gaussian noise: classes blend (v1,v2), (v1,v3), (v2,v3) respectively.
inline Dataset gen_waveform(int n, std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("gen_waveform requires n >= 1");
    constexpr int d = 21;
    Dataset out;
    out.k = 3;
    out.x = Matrix(static_cast<std::size_t>(n), d);
    out.y.resize(static_cast<std::size_t>(n));
    Rng rng(seed);
    for (int i = 0; i < n; ++i) {
        const int label = 1 + rng.uniform_int(3);
        out.y[static_cast<std::size_t>(i)] = label;
        const double u = rng.uniform01();
        const int a = label == 3 ? 2 : 1;
        const int b = label == 1 ? 2 : 3;
        for (int j = 1; j <= d; ++j) {
            const double mean = u * waveform_base(a, j) + (1.0 - u) * waveform_base(b, j);
            out.x(static_cast<std::size_t>(i), static_cast<std::size_t>(j - 1)) = mean + rng.normal();
        }
    }
    out.feature_names.reserve(d);
    for (int j = 1; j <= d; ++j) out.feature_names.push_back("x" + std::to_string(j));
    out.continuous.assign(d, true);
    return out;
}

/// Four-class Gaussian problem, 10 features. Features 1-2 carry the class
/// signal: mu1 = 3(I(y=1) - I(y=3)), mu2 = 3(I(y=2) - I(y=3)); the remaining
/// eight are pure N(0,1) noise.
inline Dataset gen_four_class(int n, std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("gen_four_class requires n >= 1");
    constexpr int d = 10;
    Dataset out;
    out.k = 4;
    out.x = Matrix(static_cast<std::size_t>(n), d);
    out.y.resize(static_cast<std::size_t>(n));
    Rng rng(seed);
    for (int i = 0; i < n; ++i) {
        const int label = 1 + rng.uniform_int(4);
        out.y[static_cast<std::size_t>(i)] = label;
        const double mu1 = 3.0 * ((label == 1 ? 1.0 : 0.0) - (label == 3 ? 1.0 : 0.0));
        const double mu2 = 3.0 * ((label == 2 ? 1.0 : 0.0) - (label == 3 ? 1.0 : 0.0));
        out.x(static_cast<std::size_t>(i), 0) = mu1 + rng.normal();
        out.x(static_cast<std::size_t>(i), 1) = mu2 + rng.normal();
        for (int j = 2; j < d; ++j)
            out.x(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = rng.normal();
    }
    out.feature_names.reserve(d);
    for (int j = 1; j <= d; ++j) out.feature_names.push_back("x" + std::to_string(j));
    out.continuous.assign(d, true);
    return out;
}

inline Dataset generate(const GeneratorSpec& spec, std::uint64_t seed, int n) {
    switch (spec.kind) {
        case GeneratorKind::waveform: return gen_waveform(n, seed);
        case GeneratorKind::four_class_gaussian: return gen_four_class(n, seed);
    }
    throw std::invalid_argument("unknown generator kind");
}

struct StandardizeStats {
    std::vector<double> mean;
    std::vector<double> sd;
    std::vector<bool> scaled;  // false for non-continuous or zero-sd columns
};

/// Column means and population standard deviations (denominator n) of the
/// continuous training columns. Zero-sd columns are flagged and left alone.
inline StandardizeStats fit_standardizer(const Dataset& train) {
    if (train.n() == 0) throw std::invalid_argument("standardize requires a nonempty training set");
    const std::size_t d = train.dim();
    const double n = static_cast<double>(train.n());
    StandardizeStats stats;
    stats.mean.assign(d, 0.0);
    stats.sd.assign(d, 1.0);
    stats.scaled.assign(d, false);
    for (std::size_t j = 0; j < d; ++j) {
        if (!train.column_continuous(j)) continue;
        double sum = 0.0;
        for (std::size_t i = 0; i < train.n(); ++i) sum += train.x(i, j);
        const double mean = sum / n;
        double ss = 0.0;
        for (std::size_t i = 0; i < train.n(); ++i) {
            const double delta = train.x(i, j) - mean;
            ss += delta * delta;
        }
        const double sd = std::sqrt(ss / n);
        if (sd > 0.0) {
            stats.mean[j] = mean;
            stats.sd[j] = sd;
            stats.scaled[j] = true;
        }
    }
    return stats;
}

inline void apply_standardizer(const StandardizeStats& stats, Dataset& ds) {
    if (stats.mean.size() != ds.dim())
        throw std::invalid_argument("standardizer dimension does not match dataset");
    for (std::size_t j = 0; j < ds.dim(); ++j) {
        if (!stats.scaled[j]) continue;
        for (std::size_t i = 0; i < ds.n(); ++i)
            ds.x(i, j) = (ds.x(i, j) - stats.mean[j]) / stats.sd[j];
    }
}

/// Standardizes the training set in place and applies the train-derived
/// statistics to every other dataset (train statistics only: no leakage).
inline StandardizeStats standardize(Dataset& train, std::span<Dataset* const> others = {}) {
    const StandardizeStats stats = fit_standardizer(train);
    apply_standardizer(stats, train);
    for (Dataset* other : others) apply_standardizer(stats, *other);
    return stats;
}

}  // namespace angleboost
