#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "angleboost/matrix.hpp"

namespace angleboost {

/// Simplex class code: K unit vectors in R^(K-1) with zero sum and equal
/// pairwise inner products 1/(1-K). Vertex j represents class j; a function
/// vector f scores class j as <f, w_j>, and prediction picks the largest
/// score (the least-angle rule). Immutable after construction.
class SimplexCode {
public:
    explicit SimplexCode(int k) : k_(k), cos_theta_(1.0 / (1.0 - k)) {
        if (k < 2) throw std::invalid_argument("SimplexCode requires K >= 2");
        const std::size_t d = static_cast<std::size_t>(k) - 1;
        vertices_ = Matrix(static_cast<std::size_t>(k), d);
        const double base = 1.0 / std::sqrt(static_cast<double>(k - 1));
        for (std::size_t j = 0; j < d; ++j) vertices_(0, j) = base;
        const double shift = -(1.0 + std::sqrt(static_cast<double>(k))) /
                             std::pow(static_cast<double>(k - 1), 1.5);
        const double spike = std::sqrt(static_cast<double>(k) / (k - 1));
        for (int cls = 2; cls <= k; ++cls) {
            for (std::size_t j = 0; j < d; ++j)
                vertices_(static_cast<std::size_t>(cls - 1), j) = shift;
            vertices_(static_cast<std::size_t>(cls - 1), static_cast<std::size_t>(cls - 2)) += spike;
        }
    }

    int k() const { return k_; }
    std::size_t dim() const { return static_cast<std::size_t>(k_) - 1; }

    /// cos of the common angle between distinct vertices, 1/(1-K).
    double cos_theta() const { return cos_theta_; }

    /// Vertex of class `cls`, 1-based.
    std::span<const double> vertex(int cls) const {
        return vertices_.row(static_cast<std::size_t>(cls - 1));
    }

    /// All K scores <f, w_1>, ..., <f, w_K>; they sum to zero.
    std::vector<double> scores(std::span<const double> f) const {
        require_dim(f);
        std::vector<double> s(static_cast<std::size_t>(k_));
        for (int cls = 1; cls <= k_; ++cls)
            s[static_cast<std::size_t>(cls - 1)] = dot(f, vertex(cls));
        return s;
    }

    double score(std::span<const double> f, int cls) const { return dot(f, vertex(cls)); }

    /// Least-angle prediction: argmax_k <f, w_k>, ties to the smallest class.
    int predict(std::span<const double> f) const {
        require_dim(f);
        int best = 1;
        double best_score = dot(f, vertex(1));
        for (int cls = 2; cls <= k_; ++cls) {
            const double s = dot(f, vertex(cls));
            if (s > best_score) {
                best_score = s;
                best = cls;
            }
        }
        return best;
    }

private:
    void require_dim(std::span<const double> f) const {
        if (f.size() != dim())
            throw std::invalid_argument("function vector must have dimension K-1");
    }

    int k_;
    double cos_theta_;
    Matrix vertices_;
};

inline SimplexCode build_simplex(int k) { return SimplexCode(k); }

}  // namespace angleboost
