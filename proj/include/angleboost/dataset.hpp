#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "angleboost/matrix.hpp"

namespace angleboost {

/// Feature matrix with labels in {1..K}. `continuous` marks columns eligible
/// for standardization (one-hot dummies are not).
struct Dataset {
    Matrix x;
    std::vector<int> y;
    int k = 0;
    std::vector<std::string> feature_names;
    std::vector<bool> continuous;

    std::size_t n() const { return x.rows(); }
    std::size_t dim() const { return x.cols(); }

    void validate() const {
        if (x.rows() == 0) throw std::invalid_argument("dataset must contain at least one example");
        if (y.size() != x.rows()) throw std::invalid_argument("label count must match row count");
        if (k < 2) throw std::invalid_argument("dataset needs K >= 2 classes");
        for (int label : y)
            if (label < 1 || label > k)
                throw std::invalid_argument("label " + std::to_string(label) + " outside {1.." +
                                            std::to_string(k) + "}");
        if (!feature_names.empty() && feature_names.size() != x.cols())
            throw std::invalid_argument("feature name count must match column count");
        if (!continuous.empty() && continuous.size() != x.cols())
            throw std::invalid_argument("continuous mask must match column count");
    }

    bool column_continuous(std::size_t j) const { return continuous.empty() || continuous[j]; }
};

}  // namespace angleboost
