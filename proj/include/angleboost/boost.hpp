#pragma once

#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "angleboost/dataset.hpp"
#include "angleboost/format.hpp"
#include "angleboost/loss.hpp"
#include "angleboost/matrix.hpp"
#include "angleboost/simplex.hpp"
#include "angleboost/tree.hpp"

namespace angleboost {

struct BoostConfig {
    int rounds = 200;
    int max_leaves = 4;
    double line_search_tol = 1e-8;
    std::uint64_t seed = 0;

    void validate() const {
        if (rounds < 1) throw std::invalid_argument("rounds must be >= 1");
        if (max_leaves < 2) throw std::invalid_argument("max_leaves must be >= 2");
        if (!(line_search_tol > 0.0)) throw std::invalid_argument("line_search_tol must be > 0");
    }
};

struct EnsembleMember {
    double beta = 0.0;
    Tree tree;
    int round = 0;  // 1-based boosting round that produced this member
};

/// Additive model f(x) = sum_m beta_m * w_{Phi_m(x)}: each tree's class
/// output enters through its simplex vertex. Prediction is the least-angle
/// rule on the accumulated f.
class Ensemble {
public:
    Ensemble(int k, LossKind loss_kind) : k_(k), loss_kind_(loss_kind), code_(k) {}

    int k() const { return k_; }
    LossKind loss_kind() const { return loss_kind_; }
    const SimplexCode& code() const { return code_; }
    const std::vector<EnsembleMember>& members() const { return members_; }

    void add_member(double beta, Tree tree, int round) {
        members_.push_back(EnsembleMember{beta, std::move(tree), round});
    }

    std::vector<double> f(std::span<const double> x) const {
        std::vector<double> acc(code_.dim(), 0.0);
        accumulate(x, acc, members_.size());
        return acc;
    }

    /// f using only the members produced in rounds 1..m (partial ensemble).
    std::vector<double> f_through_round(std::span<const double> x, int m) const {
        std::vector<double> acc(code_.dim(), 0.0);
        std::size_t count = 0;
        while (count < members_.size() && members_[count].round <= m) ++count;
        accumulate(x, acc, count);
        return acc;
    }

    int predict(std::span<const double> x) const {
        const std::vector<double> fx = f(x);
        return code_.predict(fx);
    }

private:
    void accumulate(std::span<const double> x, std::vector<double>& acc, std::size_t count) const {
        for (std::size_t m = 0; m < count; ++m) {
            const EnsembleMember& member = members_[m];
            const std::span<const double> w = code_.vertex(member.tree.predict(x));
            for (std::size_t r = 0; r < acc.size(); ++r) acc[r] += member.beta * w[r];
        }
    }

    int k_;
    LossKind loss_kind_;
    SimplexCode code_;
    std::vector<EnsembleMember> members_;
};

inline std::vector<double> ensemble_f(const Ensemble& e, std::span<const double> x) { return e.f(x); }
inline int ensemble_predict(const Ensemble& e, std::span<const double> x) { return e.predict(x); }

struct RoundRecord {
    int round = 0;
    bool accepted = false;
    double beta = 0.0;
    double epsilon = 0.0;    // AdaBoost only; 0 for LogitBoost rounds
    double train_risk = 0.0; // empirical surrogate risk after this round
};

struct FitResult {
    Ensemble ensemble;
    std::vector<RoundRecord> trace;
    Matrix final_alpha;      // normalized weight table after the last round
    Matrix final_log_gamma;  // LogitBoost only: log gamma_{i,k} = <f(x_i), w_k>
    std::vector<std::string> diagnostics;
};

/// Scalar minimizer for the step-length objective: expands a bracket
/// rightward from [0, 1] (doubling, capped at 50), then golden-section
/// refines until the bracket is narrower than tol. Throws when the objective
/// is still decreasing at the cap.
template <typename F>
double line_search_beta(F&& objective, double tol) {
    if (!(tol > 0.0)) throw std::invalid_argument("line search tolerance must be > 0");
    double hi = 1.0;
    double f_hi = objective(hi);
    while (objective(2.0 * hi) < f_hi) {
        hi *= 2.0;
        if (hi > 50.0)
            throw std::runtime_error("line search failed: objective still decreasing at beta = 50");
        f_hi = objective(hi);
    }
    // Convexity puts the minimizer inside [0, 2*hi].
    double lo = 0.0;
    hi *= 2.0;
    constexpr double kInvPhi = 0.6180339887498949;
    double m1 = hi - kInvPhi * (hi - lo);
    double m2 = lo + kInvPhi * (hi - lo);
    double f1 = objective(m1);
    double f2 = objective(m2);
    while (hi - lo > tol) {
        if (f1 <= f2) {
            hi = m2;
            m2 = m1;
            f2 = f1;
            m1 = hi - kInvPhi * (hi - lo);
            f1 = objective(m1);
        } else {
            lo = m1;
            m1 = m2;
            f1 = f2;
            m2 = lo + kInvPhi * (hi - lo);
            f2 = objective(m2);
        }
    }
    return lo + (hi - lo) / 2.0;
}

namespace detail {

inline double sigmoid(double x) {
    return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

inline double softplus(double x) {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline void check_fit_inputs(const Dataset& data, const CostMatrix& costs) {
    data.validate();
    if (costs.k() != data.k) throw std::invalid_argument("cost matrix K does not match dataset K");
    if (costs.total() <= 0.0) throw std::invalid_argument("cost matrix is identically zero");
}

inline double exp_train_risk(const SimplexCode& code, const CostMatrix& costs, const Dataset& data,
                             const Matrix& f_train) {
    double risk = 0.0;
    for (std::size_t i = 0; i < data.n(); ++i) {
        const std::vector<double> s = code.scores(f_train.row(i));
        for (int t = 1; t <= code.k(); ++t) {
            const double cost = costs.cost(data.y[i], t);
            if (cost == 0.0) continue;  // 0 * exp(large score) would be NaN
            risk += cost * std::exp(s[static_cast<std::size_t>(t - 1)]);
        }
    }
    return risk / static_cast<double>(data.n());
}

}  // namespace detail

/// Closed-form minimizer of the per-round exponential objective:
/// beta = ((K-1)/K) [log((1-eps)/eps) - log(K-1)], positive exactly when
/// eps < 1/K, i.e. when the weak learner beats random guessing.
inline double adaboost_beta(int k, double epsilon) {
    return (static_cast<double>(k - 1) / k) *
           (std::log((1.0 - epsilon) / epsilon) - std::log(static_cast<double>(k - 1)));
}

/// Angle-based cost-sensitive AdaBoost. Weights start at C[y_i][k] scaled by
/// the global sum; every round fits the weak tree on the table, steps by the
/// closed-form beta, multiplies each weight by e^{beta <g(x_i), w_k>} and
/// renormalizes. A perfect weak learner (eps = 0) gets the capped beta at
/// eps0 = 1e-10; a no-better-than-random one (beta <= 0) is skipped.
inline FitResult adaboost_fit_traced(const Dataset& data, const CostMatrix& costs,
                                     const BoostConfig& cfg) {
    cfg.validate();
    detail::check_fit_inputs(data, costs);
    const int k = data.k;
    const std::size_t n = data.n();
    const SimplexCode code(k);
    const double cos_theta = code.cos_theta();

    Matrix alpha(n, static_cast<std::size_t>(k));
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (int t = 1; t <= k; ++t) {
            alpha(i, static_cast<std::size_t>(t - 1)) = costs.cost(data.y[i], t);
            total += alpha(i, static_cast<std::size_t>(t - 1));
        }
    for (double& v : alpha.data()) v /= total;

    FitResult out{Ensemble(k, LossKind::exponential), {}, {}, {}, {}};
    Matrix f_train(n, code.dim());
    std::vector<int> pred(n);

    for (int round = 1; round <= cfg.rounds; ++round) {
        Tree tree = fit_tree(data.x, alpha, cfg.max_leaves);
        double hit = 0.0, mass = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            pred[i] = tree.predict(data.x.row(i));
            hit += alpha(i, static_cast<std::size_t>(pred[i] - 1));
        }
        for (double v : alpha.data()) mass += v;
        const double epsilon = hit / mass;

        if (epsilon >= 1.0 - 1e-12) {
            out.diagnostics.push_back("round " + std::to_string(round) +
                                      " aborted: weighted error " +
                                      detail::format_double(epsilon) + " is ~1");
            break;
        }
        const double beta = epsilon <= 0.0 ? adaboost_beta(k, 1e-10) : adaboost_beta(k, epsilon);
        RoundRecord rec{round, false, beta, epsilon, 0.0};
        if (beta <= 0.0) {
            rec.train_risk = detail::exp_train_risk(code, costs, data, f_train);
            out.trace.push_back(rec);
            continue;  // weak learner no better than random guessing
        }

        const double e_hit = std::exp(beta);
        const double e_miss = std::exp(beta * cos_theta);
        double new_total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const std::span<const double> w = code.vertex(pred[i]);
            for (std::size_t r = 0; r < code.dim(); ++r) f_train(i, r) += beta * w[r];
            for (int t = 1; t <= k; ++t) {
                double& a = alpha(i, static_cast<std::size_t>(t - 1));
                a *= (t == pred[i]) ? e_hit : e_miss;
                new_total += a;
            }
        }

        out.ensemble.add_member(beta, std::move(tree), round);
        rec.accepted = true;
        rec.train_risk = detail::exp_train_risk(code, costs, data, f_train);
        out.trace.push_back(rec);

        if (!(new_total > 0.0) || !std::isfinite(new_total)) {
            out.diagnostics.push_back("round " + std::to_string(round) +
                                      ": weight table vanished at double precision; stopping");
            break;
        }
        for (double& v : alpha.data()) v /= new_total;
    }
    out.final_alpha = std::move(alpha);
    return out;
}

/// Angle-based cost-sensitive LogitBoost. gamma_{i,k} = e^{<f(x_i), w_k>}
/// is kept in log form so the weights alpha = C * gamma/(1+gamma) and the
/// step objective sum C log(1 + gamma e^{beta <g, w>}) stay finite for large
/// f. The step comes from the golden-section line search.
inline FitResult logitboost_fit_traced(const Dataset& data, const CostMatrix& costs,
                                       const BoostConfig& cfg) {
    cfg.validate();
    detail::check_fit_inputs(data, costs);
    const int k = data.k;
    const std::size_t n = data.n();
    const SimplexCode code(k);
    const double cos_theta = code.cos_theta();

    Matrix log_gamma(n, static_cast<std::size_t>(k));
    Matrix alpha(n, static_cast<std::size_t>(k));
    auto refresh_alpha = [&]() -> bool {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (int t = 1; t <= k; ++t) {
                const double v = costs.cost(data.y[i], t) *
                                 detail::sigmoid(log_gamma(i, static_cast<std::size_t>(t - 1)));
                alpha(i, static_cast<std::size_t>(t - 1)) = v;
                total += v;
            }
        if (!(total > 0.0) || !std::isfinite(total)) return false;
        for (double& v : alpha.data()) v /= total;
        return true;
    };
    refresh_alpha();

    auto logit_risk = [&] {
        double risk = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (int t = 1; t <= k; ++t)
                risk += costs.cost(data.y[i], t) *
                        detail::softplus(log_gamma(i, static_cast<std::size_t>(t - 1)));
        return risk / static_cast<double>(n);
    };

    FitResult out{Ensemble(k, LossKind::logit), {}, {}, {}, {}};
    std::vector<int> pred(n);

    for (int round = 1; round <= cfg.rounds; ++round) {
        Tree tree = fit_tree(data.x, alpha, cfg.max_leaves);
        for (std::size_t i = 0; i < n; ++i) pred[i] = tree.predict(data.x.row(i));

        auto objective = [&](double beta) {
            double value = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                for (int t = 1; t <= k; ++t) {
                    const double s = (t == pred[i]) ? 1.0 : cos_theta;
                    value += costs.cost(data.y[i], t) *
                             detail::softplus(log_gamma(i, static_cast<std::size_t>(t - 1)) + beta * s);
                }
            return value;
        };

        // A weak learner that classifies every training row correctly sends
        // the objective monotonically down (no finite minimizer, exactly as
        // in separable logistic regression); cap the step at the bracket
        // limit instead of aborting, mirroring the eps = 0 cap in AdaBoost.
        double beta = 0.0;
        try {
            beta = line_search_beta(objective, cfg.line_search_tol);
        } catch (const std::runtime_error&) {
            beta = 50.0;
            out.diagnostics.push_back("round " + std::to_string(round) +
                                      ": step objective decreasing at the bracket cap; beta "
                                      "capped at 50");
        }

        RoundRecord rec{round, false, beta, 0.0, 0.0};
        if (beta <= cfg.line_search_tol) {
            rec.train_risk = logit_risk();
            out.trace.push_back(rec);
            continue;  // step would not move the model
        }

        for (std::size_t i = 0; i < n; ++i)
            for (int t = 1; t <= k; ++t)
                log_gamma(i, static_cast<std::size_t>(t - 1)) +=
                    beta * ((t == pred[i]) ? 1.0 : cos_theta);
        const bool weights_ok = refresh_alpha();

        out.ensemble.add_member(beta, std::move(tree), round);
        rec.accepted = true;
        rec.train_risk = logit_risk();
        out.trace.push_back(rec);

        if (!weights_ok) {
            out.diagnostics.push_back("round " + std::to_string(round) +
                                      ": weight table vanished at double precision; stopping");
            break;
        }
    }
    out.final_alpha = std::move(alpha);
    out.final_log_gamma = std::move(log_gamma);
    return out;
}

inline Ensemble adaboost_fit(const Dataset& data, const CostMatrix& costs, const BoostConfig& cfg) {
    return adaboost_fit_traced(data, costs, cfg).ensemble;
}

inline Ensemble logitboost_fit(const Dataset& data, const CostMatrix& costs, const BoostConfig& cfg) {
    return logitboost_fit_traced(data, costs, cfg).ensemble;
}

/// Text persistence: header (K, loss kind, member count), then per member a
/// beta line followed by the flat tree listing. Loads reproduce predictions
/// bit-exactly.
inline void write_ensemble(std::ostream& out, const Ensemble& e) {
    out << "ensemble K " << e.k() << " loss " << loss_kind_name(e.loss_kind()) << " members "
        << e.members().size() << '\n';
    for (const EnsembleMember& m : e.members()) {
        out << "member " << detail::format_double(m.beta) << '\n';
        write_tree(out, m.tree);
    }
}

inline Ensemble read_ensemble(std::istream& in, int expected_dim = 0) {
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("ensemble: missing header");
    std::istringstream header(line);
    std::string tag, k_tag, loss_tag, members_tag, kind_name;
    int k = 0;
    std::size_t member_count = 0;
    header >> tag >> k_tag >> k >> loss_tag >> kind_name >> members_tag >> member_count;
    if (tag != "ensemble" || k_tag != "K" || loss_tag != "loss" || members_tag != "members" || k < 2)
        throw std::runtime_error("ensemble: malformed header '" + line + "'");
    LossKind kind;
    if (kind_name == "exponential") kind = LossKind::exponential;
    else if (kind_name == "logit") kind = LossKind::logit;
    else throw std::runtime_error("ensemble: unknown loss kind '" + kind_name + "'");

    Ensemble e(k, kind);
    for (std::size_t m = 0; m < member_count; ++m) {
        if (!std::getline(in, line)) throw std::runtime_error("ensemble: truncated member list");
        std::istringstream ms(line);
        std::string member_tag, beta_token;
        ms >> member_tag >> beta_token;
        if (member_tag != "member") throw std::runtime_error("ensemble: expected member line");
        const double beta = detail::parse_double(beta_token, "ensemble member " + std::to_string(m));
        Tree tree = read_tree(in, k, expected_dim);
        e.add_member(beta, std::move(tree), static_cast<int>(m) + 1);
    }
    return e;
}

}  // namespace angleboost
