#pragma once

#include <cctype>
#include <cmath>
#include <fstream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "angleboost/matrix.hpp"
#include "angleboost/simplex.hpp"

namespace angleboost {

/// K x K misclassification costs, zero diagonal, entries >= 0, not
/// necessarily symmetric. cost(j, k) is the cost of predicting class k when
/// the truth is class j (both 1-based).
class CostMatrix {
public:
    CostMatrix(int k, Matrix entries) : k_(k), entries_(std::move(entries)) {
        if (k < 2) throw std::invalid_argument("CostMatrix requires K >= 2");
        if (entries_.rows() != static_cast<std::size_t>(k) ||
            entries_.cols() != static_cast<std::size_t>(k))
            throw std::invalid_argument("CostMatrix entries must be K x K");
        for (std::size_t j = 0; j < entries_.rows(); ++j) {
            for (std::size_t t = 0; t < entries_.cols(); ++t) {
                const double c = entries_(j, t);
                if (!std::isfinite(c) || c < 0.0)
                    throw std::invalid_argument("cost matrix entry at row " +
                                                std::to_string(j + 1) + ", column " +
                                                std::to_string(t + 1) +
                                                " must be finite and nonnegative");
                if (j == t && c != 0.0)
                    throw std::invalid_argument("cost matrix diagonal entry at row " +
                                                std::to_string(j + 1) + " must be zero");
            }
        }
    }

    int k() const { return k_; }

    double cost(int true_class, int predicted_class) const {
        return entries_(static_cast<std::size_t>(true_class - 1),
                        static_cast<std::size_t>(predicted_class - 1));
    }

    const Matrix& entries() const { return entries_; }

    double total() const {
        double s = 0.0;
        for (double c : entries_.data()) s += c;
        return s;
    }

private:
    int k_;
    Matrix entries_;
};

/// Parses a headerless CSV of K rows x K columns of decimal numbers.
inline CostMatrix parse_cost_matrix_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open cost matrix file: " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                std::size_t pos = 0;
                const double v = std::stod(cell, &pos);
                while (pos < cell.size() && std::isspace(static_cast<unsigned char>(cell[pos]))) ++pos;
                if (pos != cell.size()) throw std::invalid_argument("trailing characters");
                row.push_back(v);
            } catch (const std::exception&) {
                throw std::invalid_argument("cost matrix " + path + ": unparseable cell at row " +
                                            std::to_string(line_no) + ", column " +
                                            std::to_string(row.size() + 1));
            }
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::invalid_argument("cost matrix " + path + " is empty");
    const std::size_t k = rows.size();
    Matrix entries(k, k);
    for (std::size_t j = 0; j < k; ++j) {
        if (rows[j].size() != k)
            throw std::invalid_argument("cost matrix " + path + ": row " + std::to_string(j + 1) +
                                        " has " + std::to_string(rows[j].size()) +
                                        " columns, expected " + std::to_string(k));
        for (std::size_t t = 0; t < k; ++t) entries(j, t) = rows[j][t];
    }
    return CostMatrix(static_cast<int>(k), std::move(entries));
}

enum class LossKind { exponential, logit, lmum };

inline std::string loss_kind_name(LossKind kind) {
    switch (kind) {
        case LossKind::exponential: return "exponential";
        case LossKind::logit: return "logit";
        case LossKind::lmum: return "lmum";
    }
    return "?";
}

/// Margin loss l(z): convex, differentiable, l'(z) < 0 everywhere. The three
/// admissible kinds are the exponential loss e^-z, the logit loss
/// log(1+e^-z), and the large-margin unified machine family with parameters
/// a > 0, c >= 0 (c finite; the hinge limit c -> inf is not differentiable).
class MarginLoss {
public:
    static MarginLoss exponential() { return MarginLoss(LossKind::exponential, 0.0, 0.0); }
    static MarginLoss logit() { return MarginLoss(LossKind::logit, 0.0, 0.0); }
    static MarginLoss lmum(double a, double c) {
        if (!(a > 0.0)) throw std::invalid_argument("lmum requires a > 0");
        if (!(c >= 0.0) || !std::isfinite(c)) throw std::invalid_argument("lmum requires finite c >= 0");
        return MarginLoss(LossKind::lmum, a, c);
    }

    LossKind kind() const { return kind_; }
    double a() const { return a_; }
    double c() const { return c_; }

    double value(double z) const {
        switch (kind_) {
            case LossKind::exponential:
                return std::exp(-z);
            case LossKind::logit:
                // log(1+e^-z), arranged so the exponent is never positive
                return z >= 0.0 ? std::log1p(std::exp(-z)) : -z + std::log1p(std::exp(z));
            case LossKind::lmum: {
                const double boundary = c_ / (1.0 + c_);
                if (z < boundary) return 1.0 - z;
                return std::pow(a_ / ((1.0 + c_) * z - c_ + a_), a_) / (1.0 + c_);
            }
        }
        return 0.0;
    }

    double derivative(double z) const {
        switch (kind_) {
            case LossKind::exponential:
                return -std::exp(-z);
            case LossKind::logit:
                // -1/(1+e^z)
                return z >= 0.0 ? -std::exp(-z) / (1.0 + std::exp(-z)) : -1.0 / (1.0 + std::exp(z));
            case LossKind::lmum: {
                const double boundary = c_ / (1.0 + c_);
                if (z < boundary) return -1.0;
                return -std::pow(a_ / ((1.0 + c_) * z - c_ + a_), a_ + 1.0);
            }
        }
        return 0.0;
    }

private:
    MarginLoss(LossKind kind, double a, double c) : kind_(kind), a_(a), c_(c) {}

    LossKind kind_;
    double a_;
    double c_;
};

inline double loss_value(const MarginLoss& loss, double z) { return loss.value(z); }
inline double loss_derivative(const MarginLoss& loss, double z) { return loss.derivative(z); }

/// Angle-based cost-sensitive loss: sum_t C[y][t] * l(-<f, w_t>).
/// The zero diagonal removes the true class from the sum, so a large score
/// on the true vertex (and small scores elsewhere) drives the loss down.
inline double cs_loss(const SimplexCode& code, const CostMatrix& costs, const MarginLoss& loss,
                      std::span<const double> f, int y) {
    if (costs.k() != code.k()) throw std::invalid_argument("cost matrix K does not match simplex K");
    if (y < 1 || y > code.k()) throw std::invalid_argument("class label out of range");
    const std::vector<double> s = code.scores(f);
    double total = 0.0;
    for (int t = 1; t <= code.k(); ++t) {
        const double cost = costs.cost(y, t);
        if (cost == 0.0) continue;  // 0 * exp(large score) would be NaN
        total += cost * loss.value(-s[static_cast<std::size_t>(t - 1)]);
    }
    return total;
}

/// Empirical risk (1/n) sum_i cs_loss(f_i, y_i).
inline double empirical_risk(const SimplexCode& code, const CostMatrix& costs,
                             const MarginLoss& loss, const std::vector<std::vector<double>>& f_values,
                             const std::vector<int>& labels) {
    if (f_values.empty()) throw std::invalid_argument("empirical_risk requires at least one example");
    if (f_values.size() != labels.size())
        throw std::invalid_argument("f_values and labels must have equal length");
    double total = 0.0;
    for (std::size_t i = 0; i < f_values.size(); ++i)
        total += cs_loss(code, costs, loss, f_values[i], labels[i]);
    return total / static_cast<double>(f_values.size());
}

}  // namespace angleboost
