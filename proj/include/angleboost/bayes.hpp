#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "angleboost/loss.hpp"
#include "angleboost/matrix.hpp"
#include "angleboost/rng.hpp"
#include "angleboost/simplex.hpp"

namespace angleboost {

/// Conditional class probabilities P_j(x): nonnegative, sum to 1.
class ClassDistribution {
public:
    explicit ClassDistribution(std::vector<double> p) : p_(std::move(p)) {
        if (p_.size() < 2) throw std::invalid_argument("distribution needs K >= 2 entries");
        double sum = 0.0;
        for (double v : p_) {
            if (!(v >= 0.0)) throw std::invalid_argument("class probabilities must be nonnegative");
            sum += v;
        }
        if (std::abs(sum - 1.0) > 1e-10)
            throw std::invalid_argument("class probabilities must sum to 1");
    }

    int k() const { return static_cast<int>(p_.size()); }
    double prob(int cls) const { return p_[static_cast<std::size_t>(cls - 1)]; }
    const std::vector<double>& values() const { return p_; }

private:
    std::vector<double> p_;
};

/// Expected cost of predicting each class t under p: sum_j C[j][t] p_j.
inline std::vector<double> expected_costs(const CostMatrix& costs, const ClassDistribution& p) {
    if (costs.k() != p.k()) throw std::invalid_argument("cost matrix K does not match distribution K");
    std::vector<double> e(static_cast<std::size_t>(costs.k()), 0.0);
    for (int t = 1; t <= costs.k(); ++t)
        for (int j = 1; j <= costs.k(); ++j)
            e[static_cast<std::size_t>(t - 1)] += costs.cost(j, t) * p.prob(j);
    return e;
}

/// Cost-sensitive Bayes rule: argmin_k sum_j C[j][k] P_j, ties to the
/// smallest class. With 0/1 costs this is the standard Bayes rule.
inline int bayes_rule(const CostMatrix& costs, const ClassDistribution& p) {
    const std::vector<double> e = expected_costs(costs, p);
    int best = 1;
    for (int t = 2; t <= costs.k(); ++t)
        if (e[static_cast<std::size_t>(t - 1)] < e[static_cast<std::size_t>(best - 1)]) best = t;
    return best;
}

/// Conditional risk sum_j sum_t C[j][t] P_j l(-<w_t, f>), convex in f.
/// Loss is any type exposing value(z) and derivative(z); MarginLoss in
/// normal use, purpose-built losses in the consistency negative controls.
template <typename Loss>
double conditional_risk(const SimplexCode& code, const CostMatrix& costs,
                               const Loss& loss, const ClassDistribution& p,
                               std::span<const double> f) {
    const std::vector<double> e = expected_costs(costs, p);
    const std::vector<double> s = code.scores(f);
    double risk = 0.0;
    for (std::size_t t = 0; t < e.size(); ++t) {
        if (e[t] == 0.0) continue;
        risk += e[t] * loss.value(-s[t]);
    }
    return risk;
}

struct RiskMinimizer {
    std::vector<double> f_star;
    double achieved_risk = 0.0;
    bool converged = false;
    int iterations = 0;
};

/// Minimizes the conditional risk by gradient descent with Armijo
/// backtracking, starting from f = 0. The trial step is seeded with the
/// Barzilai-Borwein quotient s's / s'y from the previous move, which keeps
/// the iteration count low on the poorly scaled instances the consistency
/// sweep produces. The objective is smooth and convex for every admissible
/// loss kind; non-convergence within max_iter is reported through
/// `converged`, not thrown.
template <typename Loss>
RiskMinimizer minimize_conditional_risk(const SimplexCode& code, const CostMatrix& costs,
                                               const Loss& loss, const ClassDistribution& p,
                                               double tol = 1e-9, int max_iter = 10000) {
    const std::vector<double> e = expected_costs(costs, p);
    const std::size_t dim = code.dim();
    const int k = code.k();

    auto risk_at = [&](std::span<const double> f) {
        double r = 0.0;
        for (int t = 1; t <= k; ++t) {
            const double weight = e[static_cast<std::size_t>(t - 1)];
            if (weight == 0.0) continue;
            r += weight * loss.value(-code.score(f, t));
        }
        return r;
    };
    auto gradient_at = [&](std::span<const double> f, std::span<double> g) {
        std::fill(g.begin(), g.end(), 0.0);
        for (int t = 1; t <= k; ++t) {
            const double weight = e[static_cast<std::size_t>(t - 1)];
            if (weight == 0.0) continue;
            const double w = -weight * loss.derivative(-code.score(f, t));
            const std::span<const double> v = code.vertex(t);
            for (std::size_t r = 0; r < dim; ++r) g[r] += w * v[r];
        }
    };

    RiskMinimizer out;
    out.f_star.assign(dim, 0.0);
    std::vector<double> grad(dim), prev_grad(dim), trial(dim);
    double risk = risk_at(out.f_star);
    double prev_step = 0.0;

    for (int iter = 1; iter <= max_iter; ++iter) {
        out.iterations = iter;
        gradient_at(out.f_star, grad);
        double gn2 = 0.0;
        for (double g : grad) gn2 += g * g;
        if (std::sqrt(gn2) <= tol) {
            out.converged = true;
            break;
        }

        double step = 1.0;
        if (prev_step > 0.0) {
            // BB1 step from the last accepted move: s = -prev_step * prev_grad.
            double ss = 0.0, sy = 0.0;
            for (std::size_t r = 0; r < dim; ++r) {
                const double s = -prev_step * prev_grad[r];
                ss += s * s;
                sy += s * (grad[r] - prev_grad[r]);
            }
            if (sy > 0.0) step = std::clamp(ss / sy, 1e-12, 1e8);
        }

        double trial_risk = 0.0;
        while (true) {
            for (std::size_t r = 0; r < dim; ++r) trial[r] = out.f_star[r] - step * grad[r];
            trial_risk = risk_at(trial);
            if (trial_risk <= risk - 1e-4 * step * gn2) break;
            step *= 0.5;
            if (step < 1e-20) break;
        }
        if (step < 1e-20) break;  // no descent possible at double precision
        out.f_star.swap(trial);
        risk = trial_risk;
        prev_grad = grad;
        prev_step = step;
    }
    out.achieved_risk = risk;
    return out;
}

namespace detail {

/// Solves A x = b by Gaussian elimination with partial pivoting.
/// Returns false when a pivot falls below the singularity threshold.
inline bool solve_linear(Matrix a, std::vector<double> b, std::vector<double>& x,
                         double pivot_tol = 1e-12) {
    const std::size_t n = a.rows();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a(r, col)) > std::abs(a(pivot, col))) pivot = r;
        if (std::abs(a(pivot, col)) <= pivot_tol) return false;
        if (pivot != col) {
            for (std::size_t c = 0; c < n; ++c) std::swap(a(pivot, c), a(col, c));
            std::swap(b[pivot], b[col]);
        }
        for (std::size_t r = col + 1; r < n; ++r) {
            const double factor = a(r, col) / a(col, col);
            if (factor == 0.0) continue;
            for (std::size_t c = col; c < n; ++c) a(r, c) -= factor * a(col, c);
            b[r] -= factor * b[col];
        }
    }
    x.assign(n, 0.0);
    for (std::size_t r = n; r-- > 0;) {
        double v = b[r];
        for (std::size_t c = r + 1; c < n; ++c) v -= a(r, c) * x[c];
        x[r] = v / a(r, r);
    }
    return true;
}

inline bool is_zero_one_matrix(const CostMatrix& costs) {
    for (int j = 1; j <= costs.k(); ++j)
        for (int t = 1; t <= costs.k(); ++t)
            if (costs.cost(j, t) != (j == t ? 0.0 : 1.0)) return false;
    return true;
}

/// Entry t is 1 / l'(-<w_t, f*>), the quantity the stationarity condition of
/// the conditional risk ties to the expected cost of class t.
template <typename Loss>
std::vector<double> derivative_inverses(const SimplexCode& code, const Loss& loss,
                                               std::span<const double> f_star) {
    std::vector<double> inv(static_cast<std::size_t>(code.k()));
    for (int t = 1; t <= code.k(); ++t) {
        const double d = loss.derivative(-code.score(f_star, t));
        if (d == 0.0)
            throw std::domain_error("loss derivative vanished; cannot invert stationarity");
        inv[static_cast<std::size_t>(t - 1)] = 1.0 / d;
    }
    return inv;
}

}  // namespace detail

/// Expected cost per class recovered from a risk minimizer f*:
/// sum_j C[j][t] P_j = -M / l'(-<w_t, f*>). For invertible C the normalizer
/// M is fixed by the recovered probabilities summing to 1; for singular C the
/// values are returned up to scale (M = 1).
template <typename Loss>
std::vector<double> expected_costs_from_f(const SimplexCode& code, const CostMatrix& costs,
                                                 const Loss& loss,
                                                 std::span<const double> f_star) {
    const std::vector<double> linv = detail::derivative_inverses(code, loss, f_star);
    const int k = costs.k();
    Matrix ct(static_cast<std::size_t>(k), static_cast<std::size_t>(k));
    for (int j = 1; j <= k; ++j)
        for (int t = 1; t <= k; ++t)
            ct(static_cast<std::size_t>(t - 1), static_cast<std::size_t>(j - 1)) = costs.cost(j, t);
    std::vector<double> x;
    std::vector<double> out(static_cast<std::size_t>(k));
    if (detail::solve_linear(std::move(ct), linv, x)) {
        double denom = 0.0;
        for (double v : x) denom += v;
        for (std::size_t t = 0; t < out.size(); ++t) out[t] = linv[t] / denom;
    } else {
        for (std::size_t t = 0; t < out.size(); ++t) out[t] = -linv[t];
    }
    return out;
}

/// Recovers the class probabilities from f* by inverting the stationarity
/// condition of the conditional risk: p is proportional to (C^T)^-1 l*,
/// normalized to sum 1. The 0/1 cost matrix takes the closed form
/// P_t = 1 + (1-K) l*_t / sum_k l*_k, which avoids the solve.
template <typename Loss>
ClassDistribution recover_probabilities(const SimplexCode& code, const CostMatrix& costs,
                                               const Loss& loss,
                                               std::span<const double> f_star) {
    const std::vector<double> linv = detail::derivative_inverses(code, loss, f_star);
    const int k = costs.k();
    std::vector<double> p(static_cast<std::size_t>(k));
    if (detail::is_zero_one_matrix(costs)) {
        double denom = 0.0;
        for (double v : linv) denom += v;
        for (std::size_t t = 0; t < p.size(); ++t)
            p[t] = 1.0 + (1.0 - k) * linv[t] / denom;
    } else {
        Matrix ct(static_cast<std::size_t>(k), static_cast<std::size_t>(k));
        for (int j = 1; j <= k; ++j)
            for (int t = 1; t <= k; ++t)
                ct(static_cast<std::size_t>(t - 1), static_cast<std::size_t>(j - 1)) = costs.cost(j, t);
        std::vector<double> x;
        if (!detail::solve_linear(std::move(ct), linv, x))
            throw std::runtime_error("cost matrix transpose is singular; cannot recover probabilities");
        double denom = 0.0;
        for (double v : x) denom += v;
        for (std::size_t t = 0; t < p.size(); ++t) p[t] = x[t] / denom;
    }
    // Scrub floating-point dust before the distribution invariants kick in.
    double sum = 0.0;
    for (double& v : p) {
        if (v < 0.0 && v > -1e-9) v = 0.0;
        sum += v;
    }
    for (double& v : p) v /= sum;
    return ClassDistribution(std::move(p));
}

struct ConsistencyTrial {
    int trial = 0;
    std::vector<double> p;
    int bayes_class = 0;
    int predicted_class = 0;
    bool pass = false;
};

struct ConsistencyReport {
    double pass_rate = 0.0;
    std::vector<ConsistencyTrial> trials;

    std::vector<ConsistencyTrial> failures() const {
        std::vector<ConsistencyTrial> out;
        for (const auto& t : trials)
            if (!t.pass) out.push_back(t);
        return out;
    }
};

/// Numerical Fisher-consistency check: draws Dirichlet(1,...,1) class
/// distributions whose Bayes argmin wins by a margin > 0.02 (a unique argmin
/// is part of the definition), minimizes the conditional risk, and tests
/// whether the least-angle prediction at f* equals the Bayes class.
/// Trials use independent substreams of `seed` and may run on several
/// threads; results are deterministic either way.
template <typename Loss>
ConsistencyReport check_fisher_consistency(const SimplexCode& code, const CostMatrix& costs,
                                                  const Loss& loss, int trials,
                                                  std::uint64_t seed, int threads = 1) {
    if (trials < 1) throw std::invalid_argument("trials must be >= 1");
    constexpr double kMargin = 0.02;
    const int k = code.k();
    const Rng root(seed);

    ConsistencyReport report;
    report.trials.assign(static_cast<std::size_t>(trials), ConsistencyTrial{});

    auto run_trial = [&](int index) {
        Rng rng = root.substream(static_cast<std::uint64_t>(index));
        std::vector<double> draw(static_cast<std::size_t>(k));
        ClassDistribution p({0.5, 0.5});
        for (int attempt = 0; attempt < 100000; ++attempt) {
            double total = 0.0;
            for (double& v : draw) {
                v = rng.exponential();
                total += v;
            }
            std::vector<double> probs(draw);
            for (double& v : probs) v /= total;
            ClassDistribution candidate(std::move(probs));
            std::vector<double> e = expected_costs(costs, candidate);
            std::sort(e.begin(), e.end());
            if (e[1] - e[0] > kMargin) {
                p = std::move(candidate);
                break;
            }
        }
        const RiskMinimizer rm = minimize_conditional_risk(code, costs, loss, p);
        ConsistencyTrial& t = report.trials[static_cast<std::size_t>(index)];
        t.trial = index;
        t.p = p.values();
        t.bayes_class = bayes_rule(costs, p);
        t.predicted_class = code.predict(rm.f_star);
        t.pass = (t.bayes_class == t.predicted_class);
    };

    if (threads <= 1) {
        for (int i = 0; i < trials; ++i) run_trial(i);
    } else {
        const int workers = std::min(threads, trials);
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                for (int i = w; i < trials; i += workers) run_trial(i);
            });
        }
        for (auto& th : pool) th.join();
    }

    int passed = 0;
    for (const auto& t : report.trials) passed += t.pass ? 1 : 0;
    report.pass_rate = static_cast<double>(passed) / static_cast<double>(trials);
    return report;
}

}  // namespace angleboost
