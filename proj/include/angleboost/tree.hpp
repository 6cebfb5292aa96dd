#pragma once

#include <algorithm>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "angleboost/format.hpp"
#include "angleboost/matrix.hpp"

namespace angleboost {

/// Per-example, per-class cost weights: alpha(i, k-1) is the current cost of
/// assigning example i to class k. Rows of the true class carry weight zero
/// whenever the cost matrix has a zero diagonal.
using WeightTable = Matrix;

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int label = 0;  // leaf class, 1-based
    int left = -1;
    int right = -1;

    bool is_leaf() const { return feature < 0; }
};

/// Axis-aligned binary classification tree. Routing: value <= threshold goes
/// left. Immutable after fitting; safe to share across threads.
class Tree {
public:
    Tree() = default;
    Tree(std::vector<TreeNode> nodes, int leaf_count)
        : nodes_(std::move(nodes)), leaf_count_(leaf_count) {
        validate();
    }

    int predict(std::span<const double> x) const {
        int node = 0;
        while (!nodes_[static_cast<std::size_t>(node)].is_leaf()) {
            const TreeNode& n = nodes_[static_cast<std::size_t>(node)];
            node = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
        }
        return nodes_[static_cast<std::size_t>(node)].label;
    }

    int leaf_count() const { return leaf_count_; }
    const std::vector<TreeNode>& nodes() const { return nodes_; }

    int max_feature_index() const {
        int m = -1;
        for (const TreeNode& n : nodes_)
            if (!n.is_leaf()) m = std::max(m, n.feature);
        return m;
    }

private:
    void validate() const {
        if (nodes_.empty()) throw std::invalid_argument("tree must have at least one node");
        int leaves = 0;
        for (const TreeNode& n : nodes_) {
            if (n.is_leaf()) {
                if (n.label < 1) throw std::invalid_argument("leaf label must be a class in {1..K}");
                ++leaves;
            } else {
                if (n.feature < 0) throw std::invalid_argument("split feature index out of range");
                const int size = static_cast<int>(nodes_.size());
                if (n.left < 0 || n.left >= size || n.right < 0 || n.right >= size)
                    throw std::invalid_argument("tree child index out of range");
            }
        }
        if (leaves != leaf_count_) throw std::invalid_argument("leaf_count does not match structure");
    }

    std::vector<TreeNode> nodes_;
    int leaf_count_ = 0;
};

/// Label minimizing the summed weight over the given rows; ties take the
/// smallest class.
inline int leaf_label(const WeightTable& alpha, std::span<const int> rows) {
    if (rows.empty()) throw std::invalid_argument("leaf_label requires at least one row");
    const std::size_t k = alpha.cols();
    std::vector<double> column_sum(k, 0.0);
    for (int i : rows) {
        const auto row = alpha.row(static_cast<std::size_t>(i));
        for (std::size_t c = 0; c < k; ++c) column_sum[c] += row[c];
    }
    std::size_t best = 0;
    for (std::size_t c = 1; c < k; ++c)
        if (column_sum[c] < column_sum[best]) best = c;
    return static_cast<int>(best) + 1;
}

namespace detail {

struct SplitCandidate {
    bool found = false;
    int feature = 0;
    double threshold = 0.0;
    double cost = std::numeric_limits<double>::infinity();
};

struct GrowingLeaf {
    int node_id = 0;
    std::vector<int> rows;
    double cost = 0.0;  // min_k of the column sums over rows
    int label = 1;
    SplitCandidate best;
};

inline void leaf_cost_and_label(const Matrix& alpha, std::span<const int> rows, double& cost,
                                int& label) {
    const std::size_t k = alpha.cols();
    std::vector<double> column_sum(k, 0.0);
    for (int i : rows) {
        const auto row = alpha.row(static_cast<std::size_t>(i));
        for (std::size_t c = 0; c < k; ++c) column_sum[c] += row[c];
    }
    std::size_t best = 0;
    for (std::size_t c = 1; c < k; ++c)
        if (column_sum[c] < column_sum[best]) best = c;
    cost = column_sum[best];
    label = static_cast<int>(best) + 1;
}

/// Exhaustive scan over (feature, midpoint-threshold) candidates. Each
/// feature is sorted once; left column sums accumulate as a prefix while the
/// right side is total minus prefix, so a full feature costs O(n log n + nK).
/// Ties resolve to the lowest feature index, then the lowest threshold; a
/// candidate must beat the incumbent by more than a mass-relative tolerance,
/// otherwise two features inducing the same row partition would be ranked by
/// floating-point summation noise (and the winner would change when alpha is
/// rescaled).
inline SplitCandidate best_split(const Matrix& x, const Matrix& alpha, std::span<const int> rows) {
    SplitCandidate best;
    const std::size_t k = alpha.cols();
    const std::size_t d = x.cols();
    if (rows.size() < 2) return best;

    std::vector<double> total(k, 0.0);
    for (int i : rows) {
        const auto row = alpha.row(static_cast<std::size_t>(i));
        for (std::size_t c = 0; c < k; ++c) total[c] += row[c];
    }
    double mass = 0.0;
    for (double t : total) mass += t;
    const double tie_tol = 1e-12 * mass;

    std::vector<int> order(rows.begin(), rows.end());
    std::vector<double> prefix(k);
    for (std::size_t j = 0; j < d; ++j) {
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            const double va = x(static_cast<std::size_t>(a), j);
            const double vb = x(static_cast<std::size_t>(b), j);
            return va < vb || (va == vb && a < b);
        });
        std::fill(prefix.begin(), prefix.end(), 0.0);
        for (std::size_t pos = 0; pos + 1 < order.size(); ++pos) {
            const auto row = alpha.row(static_cast<std::size_t>(order[pos]));
            for (std::size_t c = 0; c < k; ++c) prefix[c] += row[c];
            const double lo = x(static_cast<std::size_t>(order[pos]), j);
            const double hi = x(static_cast<std::size_t>(order[pos + 1]), j);
            if (!(hi > lo)) continue;
            double left = prefix[0], right = total[0] - prefix[0];
            for (std::size_t c = 1; c < k; ++c) {
                left = std::min(left, prefix[c]);
                right = std::min(right, total[c] - prefix[c]);
            }
            const double cost = left + right;
            if (cost < best.cost - tie_tol) {
                best.found = true;
                best.feature = static_cast<int>(j);
                best.threshold = lo + (hi - lo) / 2.0;
                best.cost = cost;
            }
        }
    }
    return best;
}

}  // namespace detail

/// Fits a tree minimizing the weighted cost sum_i alpha[i][Phi(x_i)] by
/// best-first growth: the leaf whose best split removes the most cost is
/// expanded until max_leaves is reached or no split improves by more than
/// 1e-12. Greedy, so only the single-split case is provably optimal.
inline Tree fit_tree(const Matrix& x, const WeightTable& alpha, int max_leaves) {
    if (x.rows() == 0) throw std::invalid_argument("fit_tree requires at least one example");
    if (alpha.rows() != x.rows()) throw std::invalid_argument("weight table rows must match X");
    if (alpha.cols() < 2) throw std::invalid_argument("weight table needs K >= 2 columns");
    if (max_leaves < 2) throw std::invalid_argument("max_leaves must be >= 2");
    constexpr double kMinGain = 1e-12;

    std::vector<TreeNode> nodes;
    std::vector<detail::GrowingLeaf> leaves;

    detail::GrowingLeaf root;
    root.node_id = 0;
    root.rows.resize(x.rows());
    std::iota(root.rows.begin(), root.rows.end(), 0);
    detail::leaf_cost_and_label(alpha, root.rows, root.cost, root.label);
    root.best = detail::best_split(x, alpha, root.rows);
    nodes.push_back(TreeNode{-1, 0.0, root.label, -1, -1});
    leaves.push_back(std::move(root));

    int leaf_count = 1;
    while (leaf_count < max_leaves) {
        int chosen = -1;
        double chosen_gain = kMinGain;
        for (std::size_t i = 0; i < leaves.size(); ++i) {
            if (!leaves[i].best.found) continue;
            const double gain = leaves[i].cost - leaves[i].best.cost;
            if (gain > chosen_gain) {
                chosen_gain = gain;
                chosen = static_cast<int>(i);
            }
        }
        if (chosen < 0) break;

        detail::GrowingLeaf parent = std::move(leaves[static_cast<std::size_t>(chosen)]);
        leaves.erase(leaves.begin() + chosen);

        detail::GrowingLeaf left, right;
        for (int i : parent.rows) {
            const double v = x(static_cast<std::size_t>(i), static_cast<std::size_t>(parent.best.feature));
            (v <= parent.best.threshold ? left.rows : right.rows).push_back(i);
        }
        detail::leaf_cost_and_label(alpha, left.rows, left.cost, left.label);
        detail::leaf_cost_and_label(alpha, right.rows, right.cost, right.label);
        left.best = detail::best_split(x, alpha, left.rows);
        right.best = detail::best_split(x, alpha, right.rows);

        left.node_id = static_cast<int>(nodes.size());
        nodes.push_back(TreeNode{-1, 0.0, left.label, -1, -1});
        right.node_id = static_cast<int>(nodes.size());
        nodes.push_back(TreeNode{-1, 0.0, right.label, -1, -1});

        TreeNode& split = nodes[static_cast<std::size_t>(parent.node_id)];
        split.feature = parent.best.feature;
        split.threshold = parent.best.threshold;
        split.label = 0;
        split.left = left.node_id;
        split.right = right.node_id;

        leaves.push_back(std::move(left));
        leaves.push_back(std::move(right));
        ++leaf_count;
    }

    return Tree(std::move(nodes), leaf_count);
}

inline int tree_predict(const Tree& tree, std::span<const double> x) { return tree.predict(x); }

/// Weighted cost of routing every example through the tree.
inline double tree_cost(const Tree& tree, const Matrix& x, const WeightTable& alpha) {
    double cost = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i)
        cost += alpha(i, static_cast<std::size_t>(tree.predict(x.row(i)) - 1));
    return cost;
}

/// Flat text form, one node per line: id kind feature threshold label left right.
inline void write_tree(std::ostream& out, const Tree& tree) {
    out << "tree " << tree.nodes().size() << ' ' << tree.leaf_count() << '\n';
    for (std::size_t id = 0; id < tree.nodes().size(); ++id) {
        const TreeNode& n = tree.nodes()[id];
        out << id << ' ' << (n.is_leaf() ? "leaf" : "split") << ' ' << n.feature << ' '
            << detail::format_double(n.threshold) << ' ' << n.label << ' ' << n.left << ' '
            << n.right << '\n';
    }
}

inline Tree read_tree(std::istream& in, int expected_k = 0, int expected_dim = 0) {
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("tree: missing header line");
    std::istringstream header(line);
    std::string tag;
    std::size_t node_count = 0;
    int leaf_count = 0;
    header >> tag >> node_count >> leaf_count;
    if (tag != "tree" || node_count == 0) throw std::runtime_error("tree: malformed header");

    std::vector<TreeNode> nodes(node_count);
    for (std::size_t i = 0; i < node_count; ++i) {
        if (!std::getline(in, line)) throw std::runtime_error("tree: truncated node list");
        std::istringstream ls(line);
        std::size_t id = 0;
        std::string kind, threshold_token;
        TreeNode n;
        if (!(ls >> id >> kind >> n.feature >> threshold_token >> n.label >> n.left >> n.right) ||
            id >= node_count)
            throw std::runtime_error("tree: malformed node line '" + line + "'");
        n.threshold = detail::parse_double(threshold_token, "tree node " + std::to_string(id));
        if (kind == "leaf") {
            n.feature = -1;
            if (expected_k > 0 && n.label > expected_k)
                throw std::runtime_error("tree: leaf label exceeds class count");
        } else if (kind == "split") {
            if (n.feature < 0 || (expected_dim > 0 && n.feature >= expected_dim))
                throw std::runtime_error("tree: split feature index out of range");
        } else {
            throw std::runtime_error("tree: unknown node kind '" + kind + "'");
        }
        nodes[id] = n;
    }
    return Tree(std::move(nodes), leaf_count);
}

}  // namespace angleboost
