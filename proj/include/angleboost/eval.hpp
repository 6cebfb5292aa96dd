#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <mutex>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "angleboost/boost.hpp"
#include "angleboost/csv.hpp"
#include "angleboost/data.hpp"
#include "angleboost/format.hpp"
#include "angleboost/loss.hpp"
#include "angleboost/matrix.hpp"
#include "angleboost/rng.hpp"

namespace angleboost {

/// Average cost-matrix entry over (true label, prediction) pairs; the zero
/// diagonal makes the y != k restriction automatic. Reduces to the
/// misclassification rate under 0/1 costs.
inline double test_cost(const CostMatrix& costs, std::span<const int> predictions,
                        std::span<const int> labels) {
    if (predictions.size() != labels.size())
        throw std::invalid_argument("predictions and labels must have equal length");
    if (predictions.empty()) throw std::invalid_argument("test_cost requires at least one example");
    double total = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i)
        total += costs.cost(labels[i], predictions[i]);
    return total / static_cast<double>(predictions.size());
}

/// Built-in cost matrices: zero_one and the two linear families work for any
/// K; sim1 and sim2 are the literal three- and four-class benchmark matrices.
inline CostMatrix builtin_cost(const std::string& name, int k) {
    if (name == "sim1") {
        if (k != 3) throw std::invalid_argument("sim1 cost matrix requires K = 3");
        Matrix m(3, 3);
        const double values[3][3] = {{0, 2, 2}, {1, 0, 1}, {1, 1, 0}};
        for (int j = 0; j < 3; ++j)
            for (int t = 0; t < 3; ++t) m(static_cast<std::size_t>(j), static_cast<std::size_t>(t)) = values[j][t];
        return CostMatrix(3, std::move(m));
    }
    if (name == "sim2") {
        if (k != 4) throw std::invalid_argument("sim2 cost matrix requires K = 4");
        Matrix m(4, 4);
        const double values[4][4] = {
            {0, 1, 2, 2}, {1, 0, 2, 2}, {0.5, 0.5, 0, 1}, {0.5, 0.5, 1, 0}};
        for (int j = 0; j < 4; ++j)
            for (int t = 0; t < 4; ++t) m(static_cast<std::size_t>(j), static_cast<std::size_t>(t)) = values[j][t];
        return CostMatrix(4, std::move(m));
    }
    if (k < 2) throw std::invalid_argument("builtin cost matrix requires K >= 2");
    Matrix m(static_cast<std::size_t>(k), static_cast<std::size_t>(k));
    for (int j = 1; j <= k; ++j) {
        for (int t = 1; t <= k; ++t) {
            double value = 0.0;
            if (name == "zero_one") value = (j != t) ? 1.0 : 0.0;
            else if (name == "linear") value = std::abs(j - t);
            else if (name == "partitioned_linear") value = (t >= j) ? (t - j) : 10.0 * (j - t);
            else throw std::invalid_argument("unknown cost matrix name '" + name + "'");
            m(static_cast<std::size_t>(j - 1), static_cast<std::size_t>(t - 1)) = value;
        }
    }
    return CostMatrix(k, std::move(m));
}

enum class Algorithm { adaboost, logitboost };

inline std::string algorithm_name(Algorithm algo) {
    return algo == Algorithm::adaboost ? "adaboost" : "logitboost";
}

/// Where a replication's data comes from: a synthetic generator, or a CSV
/// re-split into train/test each replication.
struct DatasetSource {
    bool is_generator = true;
    GeneratorSpec generator;

    std::string csv_path;
    std::string label_column;
    double train_fraction = 0.04;
    bool stratified = true;
};

struct ExperimentSpec {
    DatasetSource dataset;
    Algorithm algorithm = Algorithm::adaboost;
    CostMatrix cost;
    int rounds = 200;
    int replications = 100;
    std::uint64_t seed = 0;
    int max_leaves = 4;
    int threads = 1;
    std::function<void(int replication, double final_cost)> on_replication;

    void validate() const {
        if (rounds < 1) throw std::invalid_argument("rounds must be >= 1");
        if (replications < 1) throw std::invalid_argument("replications must be >= 1");
        if (max_leaves < 2) throw std::invalid_argument("max_leaves must be >= 2");
    }
};

struct CostCurve {
    Matrix per_replication;  // replications x rounds; failed rows are NaN
    std::vector<double> mean;
    std::vector<double> se;  // sample sd / sqrt(#successful replications)
    std::vector<int> failed_replications;

    double final_mean() const { return mean.back(); }
    double final_se() const { return se.back(); }
};

namespace detail {

inline Dataset take_rows(const Dataset& src, std::span<const std::size_t> rows) {
    Dataset out;
    out.k = src.k;
    out.feature_names = src.feature_names;
    out.continuous = src.continuous;
    out.x = Matrix(rows.size(), src.dim());
    out.y.resize(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto row = src.x.row(rows[i]);
        std::copy(row.begin(), row.end(), out.x.row(i).begin());
        out.y[i] = src.y[rows[i]];
    }
    return out;
}

/// Train/test replication split of a fixed table. Stratified: round(frac*n_c)
/// per class, at least one training row per class.
inline void split_indices(const Dataset& full, double train_fraction, bool stratified, Rng& rng,
                          std::vector<std::size_t>& train, std::vector<std::size_t>& test) {
    train.clear();
    test.clear();
    auto shuffle = [&rng](std::vector<std::size_t>& v) {
        for (std::size_t i = v.size(); i > 1; --i)
            std::swap(v[i - 1], v[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(i)))]);
    };
    if (stratified) {
        for (int cls = 1; cls <= full.k; ++cls) {
            std::vector<std::size_t> members;
            for (std::size_t i = 0; i < full.n(); ++i)
                if (full.y[i] == cls) members.push_back(i);
            if (members.empty()) continue;
            shuffle(members);
            std::size_t take = static_cast<std::size_t>(
                std::lround(train_fraction * static_cast<double>(members.size())));
            take = std::clamp<std::size_t>(take, 1, members.size());
            for (std::size_t i = 0; i < members.size(); ++i)
                (i < take ? train : test).push_back(members[i]);
        }
    } else {
        std::vector<std::size_t> all(full.n());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        shuffle(all);
        std::size_t take = static_cast<std::size_t>(
            std::lround(train_fraction * static_cast<double>(all.size())));
        take = std::clamp<std::size_t>(take, 1, all.size() - 1);
        for (std::size_t i = 0; i < all.size(); ++i) (i < take ? train : test).push_back(all[i]);
    }
    std::sort(train.begin(), train.end());
    std::sort(test.begin(), test.end());
    if (test.empty()) throw std::invalid_argument("train fraction leaves no test rows");
}

/// Test costs of every partial ensemble f^(1..rounds), computed by adding one
/// member's vertex contribution at a time to cached per-row f values.
inline std::vector<double> per_round_costs(const Ensemble& ensemble, const CostMatrix& costs,
                                           const Dataset& test, int rounds) {
    const SimplexCode& code = ensemble.code();
    const std::size_t n = test.n();
    Matrix f(n, code.dim());
    std::vector<double> curve(static_cast<std::size_t>(rounds));
    std::vector<int> pred(n, 1);
    std::size_t next_member = 0;
    bool dirty = true;  // predictions stale only when a member lands
    for (int round = 1; round <= rounds; ++round) {
        while (next_member < ensemble.members().size() &&
               ensemble.members()[next_member].round == round) {
            const EnsembleMember& m = ensemble.members()[next_member];
            for (std::size_t i = 0; i < n; ++i) {
                const std::span<const double> w = code.vertex(m.tree.predict(test.x.row(i)));
                auto row = f.row(i);
                for (std::size_t r = 0; r < row.size(); ++r) row[r] += m.beta * w[r];
            }
            ++next_member;
            dirty = true;
        }
        if (dirty) {
            for (std::size_t i = 0; i < n; ++i) pred[i] = code.predict(f.row(i));
            dirty = false;
        }
        curve[static_cast<std::size_t>(round - 1)] = test_cost(costs, pred, test.y);
    }
    return curve;
}

}  // namespace detail

/// Runs `replications` independent fits, evaluating the test cost of every
/// partial ensemble. Replication r draws all of its randomness from
/// substream(r) of the experiment seed, so results do not depend on the
/// thread count. Failed replications are excluded from the summary and
/// reported in `failed_replications`.
inline CostCurve run_experiment(const ExperimentSpec& spec) {
    spec.validate();
    const double nan = std::nan("");

    // CSV sources are read and encoded once; replications only re-split.
    Dataset csv_full;
    if (!spec.dataset.is_generator) {
        const CsvTable table = read_csv_table(spec.dataset.csv_path);
        csv_full = load_csv(spec.dataset.csv_path, spec.dataset.label_column,
                            infer_schema(table, spec.dataset.label_column));
        if (csv_full.k != spec.cost.k())
            throw std::invalid_argument("cost matrix K does not match CSV class count");
    }

    CostCurve curve;
    curve.per_replication = Matrix(static_cast<std::size_t>(spec.replications),
                                   static_cast<std::size_t>(spec.rounds), nan);
    std::vector<std::string> failures(static_cast<std::size_t>(spec.replications));
    const Rng root(spec.seed);
    std::mutex report_mutex;

    auto run_one = [&](int rep) {
        const Rng stream = root.substream(static_cast<std::uint64_t>(rep));
        Dataset train, test;
        if (spec.dataset.is_generator) {
            const GeneratorSpec& gen = spec.dataset.generator;
            const Dataset full =
                generate(gen, stream.seed(), gen.n_train + gen.n_test);
            std::vector<std::size_t> train_rows(static_cast<std::size_t>(gen.n_train));
            std::vector<std::size_t> test_rows(static_cast<std::size_t>(gen.n_test));
            for (std::size_t i = 0; i < train_rows.size(); ++i) train_rows[i] = i;
            for (std::size_t i = 0; i < test_rows.size(); ++i)
                test_rows[i] = static_cast<std::size_t>(gen.n_train) + i;
            train = detail::take_rows(full, train_rows);
            test = detail::take_rows(full, test_rows);
        } else {
            Rng split_rng = stream;
            std::vector<std::size_t> train_rows, test_rows;
            detail::split_indices(csv_full, spec.dataset.train_fraction, spec.dataset.stratified,
                                  split_rng, train_rows, test_rows);
            train = detail::take_rows(csv_full, train_rows);
            test = detail::take_rows(csv_full, test_rows);
            Dataset* apply_to[] = {&test};
            standardize(train, apply_to);
        }

        BoostConfig cfg;
        cfg.rounds = spec.rounds;
        cfg.max_leaves = spec.max_leaves;
        cfg.seed = stream.seed();
        const Ensemble ensemble = spec.algorithm == Algorithm::adaboost
                                      ? adaboost_fit(train, spec.cost, cfg)
                                      : logitboost_fit(train, spec.cost, cfg);
        const std::vector<double> costs =
            detail::per_round_costs(ensemble, spec.cost, test, spec.rounds);
        for (std::size_t m = 0; m < costs.size(); ++m)
            curve.per_replication(static_cast<std::size_t>(rep), m) = costs[m];
        if (spec.on_replication) {
            const std::lock_guard<std::mutex> lock(report_mutex);
            spec.on_replication(rep, costs.back());
        }
    };

    const int workers = std::clamp(spec.threads, 1, spec.replications);
    if (workers == 1) {
        for (int rep = 0; rep < spec.replications; ++rep) {
            try {
                run_one(rep);
            } catch (const std::exception& e) {
                failures[static_cast<std::size_t>(rep)] = e.what();
            }
        }
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                for (int rep = w; rep < spec.replications; rep += workers) {
                    try {
                        run_one(rep);
                    } catch (const std::exception& e) {
                        failures[static_cast<std::size_t>(rep)] = e.what();
                    }
                }
            });
        }
        for (auto& th : pool) th.join();
    }

    for (int rep = 0; rep < spec.replications; ++rep)
        if (!failures[static_cast<std::size_t>(rep)].empty()) curve.failed_replications.push_back(rep);

    curve.mean.assign(static_cast<std::size_t>(spec.rounds), nan);
    curve.se.assign(static_cast<std::size_t>(spec.rounds), nan);
    const std::size_t ok = static_cast<std::size_t>(spec.replications) -
                           curve.failed_replications.size();
    if (ok == 0) return curve;
    for (int m = 0; m < spec.rounds; ++m) {
        double sum = 0.0;
        for (int rep = 0; rep < spec.replications; ++rep) {
            const double v = curve.per_replication(static_cast<std::size_t>(rep),
                                                   static_cast<std::size_t>(m));
            if (!std::isnan(v)) sum += v;
        }
        const double mean = sum / static_cast<double>(ok);
        double ss = 0.0;
        for (int rep = 0; rep < spec.replications; ++rep) {
            const double v = curve.per_replication(static_cast<std::size_t>(rep),
                                                   static_cast<std::size_t>(m));
            if (!std::isnan(v)) ss += (v - mean) * (v - mean);
        }
        curve.mean[static_cast<std::size_t>(m)] = mean;
        curve.se[static_cast<std::size_t>(m)] =
            ok > 1 ? std::sqrt(ss / static_cast<double>(ok - 1)) / std::sqrt(static_cast<double>(ok))
                   : 0.0;
    }
    return curve;
}

/// Output CSV 1: replication, round, test_cost (failed replications omitted).
inline void write_curve_csv(std::ostream& out, const CostCurve& curve,
                            const std::string& comment = {}) {
    if (!comment.empty()) out << "# " << comment << '\n';
    out << "replication,round,test_cost\n";
    for (std::size_t rep = 0; rep < curve.per_replication.rows(); ++rep) {
        if (std::isnan(curve.per_replication(rep, 0))) continue;
        for (std::size_t m = 0; m < curve.per_replication.cols(); ++m)
            out << rep << ',' << (m + 1) << ',' << detail::format_double(curve.per_replication(rep, m))
                << '\n';
    }
}

/// Output CSV 2: round, mean, se.
inline void write_summary_csv(std::ostream& out, const CostCurve& curve,
                              const std::string& comment = {}) {
    if (!comment.empty()) out << "# " << comment << '\n';
    out << "round,mean,se\n";
    for (std::size_t m = 0; m < curve.mean.size(); ++m)
        out << (m + 1) << ',' << detail::format_double(curve.mean[m]) << ','
            << detail::format_double(curve.se[m]) << '\n';
}

}  // namespace angleboost
