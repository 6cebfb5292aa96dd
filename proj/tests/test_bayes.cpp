#include <cmath>
#include <stdexcept>
#include <vector>

#include "angleboost/bayes.hpp"
#include "angleboost/eval.hpp"
#include "angleboost/loss.hpp"
#include "angleboost/rng.hpp"
#include "angleboost/simplex.hpp"
#include "doctest.h"

using angleboost::ClassDistribution;
using angleboost::CostMatrix;
using angleboost::MarginLoss;
using angleboost::Matrix;
using angleboost::Rng;
using angleboost::SimplexCode;
using angleboost::builtin_cost;

namespace {

ClassDistribution dirichlet(Rng& rng, int k) {
    std::vector<double> p(static_cast<std::size_t>(k));
    double total = 0.0;
    for (double& v : p) {
        v = rng.exponential();
        total += v;
    }
    for (double& v : p) v /= total;
    return ClassDistribution(std::move(p));
}

CostMatrix random_costs(Rng& rng, int k) {
    Matrix m(static_cast<std::size_t>(k), static_cast<std::size_t>(k));
    for (int j = 0; j < k; ++j)
        for (int t = 0; t < k; ++t)
            if (j != t)
                m(static_cast<std::size_t>(j), static_cast<std::size_t>(t)) = 0.2 + 3.0 * rng.uniform01();
    return CostMatrix(k, std::move(m));
}

// Non-admissible negative control: convex but the derivative changes sign.
struct SquaredLoss {
    double value(double z) const { return z * z; }
    double derivative(double z) const { return 2.0 * z; }
};

}  // namespace

TEST_CASE("class distribution invariants") {
    CHECK_THROWS_AS(ClassDistribution({0.5, 0.6}), std::invalid_argument);
    CHECK_THROWS_AS(ClassDistribution({1.2, -0.2}), std::invalid_argument);
    const ClassDistribution ok({0.25, 0.75});
    CHECK(ok.prob(2) == 0.75);
}

TEST_CASE("bayes rule") {
    SUBCASE("0/1 costs reduce to argmax probability") {
        const CostMatrix costs = builtin_cost("zero_one", 4);
        const ClassDistribution p({0.1, 0.2, 0.6, 0.1});
        CHECK(angleboost::bayes_rule(costs, p) == 3);
    }
    SUBCASE("three-class benchmark matrix, p = (0.3, 0.4, 0.3)") {
        // expected costs: (0.7, 0.9, 1.0) -> class 1
        const CostMatrix costs = builtin_cost("sim1", 3);
        const ClassDistribution p({0.3, 0.4, 0.3});
        const std::vector<double> e = angleboost::expected_costs(costs, p);
        CHECK(e[0] == doctest::Approx(0.7));
        CHECK(e[1] == doctest::Approx(0.9));
        CHECK(e[2] == doctest::Approx(1.0));
        CHECK(angleboost::bayes_rule(costs, p) == 1);
    }
    SUBCASE("uniform probabilities with symmetric costs tie-break to class 1") {
        const CostMatrix costs = builtin_cost("zero_one", 5);
        const ClassDistribution p({0.2, 0.2, 0.2, 0.2, 0.2});
        CHECK(angleboost::bayes_rule(costs, p) == 1);
    }
    SUBCASE("invariant under positive scaling of the cost matrix") {
        Rng rng(3);
        for (int rep = 0; rep < 50; ++rep) {
            const int k = 2 + rng.uniform_int(5);
            const CostMatrix costs = random_costs(rng, k);
            const ClassDistribution p = dirichlet(rng, k);
            const double scale = 0.1 + 9.0 * rng.uniform01();
            Matrix scaled(static_cast<std::size_t>(k), static_cast<std::size_t>(k));
            for (int j = 1; j <= k; ++j)
                for (int t = 1; t <= k; ++t)
                    scaled(static_cast<std::size_t>(j - 1), static_cast<std::size_t>(t - 1)) =
                        scale * costs.cost(j, t);
            CHECK(angleboost::bayes_rule(costs, p) ==
                  angleboost::bayes_rule(CostMatrix(k, std::move(scaled)), p));
        }
    }
}

TEST_CASE("conditional risk") {
    const SimplexCode code(3);
    const CostMatrix costs = builtin_cost("sim1", 3);
    const MarginLoss expo = MarginLoss::exponential();

    SUBCASE("f = 0 with exponential loss gives probability-weighted row sums") {
        const ClassDistribution p({0.5, 0.3, 0.2});
        const std::vector<double> f(code.dim(), 0.0);
        double expected = 0.0;
        for (int j = 1; j <= 3; ++j) {
            double row = 0.0;
            for (int t = 1; t <= 3; ++t) row += costs.cost(j, t);
            expected += p.prob(j) * row;
        }
        CHECK(angleboost::conditional_risk(code, costs, expo, p, f) ==
              doctest::Approx(expected).epsilon(1e-14));
    }
    SUBCASE("0/1 costs, uniform p, f = 0 gives K-1") {
        const CostMatrix zo = builtin_cost("zero_one", 4);
        const SimplexCode code4(4);
        const ClassDistribution p({0.25, 0.25, 0.25, 0.25});
        const std::vector<double> f(code4.dim(), 0.0);
        CHECK(angleboost::conditional_risk(code4, zo, expo, p, f) ==
              doctest::Approx(3.0).epsilon(1e-14));
    }
    SUBCASE("matches the Monte-Carlo expectation of cs_loss") {
        const ClassDistribution p({0.6, 0.25, 0.15});
        const std::vector<double> f{0.4, -0.7};
        const double exact = angleboost::conditional_risk(code, costs, expo, p, f);
        Rng rng(101);
        const int samples = 200000;
        double sum = 0.0, sumsq = 0.0;
        for (int s = 0; s < samples; ++s) {
            const double u = rng.uniform01();
            const int y = u < 0.6 ? 1 : (u < 0.85 ? 2 : 3);
            const double v = angleboost::cs_loss(code, costs, expo, f, y);
            sum += v;
            sumsq += v * v;
        }
        const double mean = sum / samples;
        const double sd = std::sqrt((sumsq / samples - mean * mean) / samples);
        CHECK(std::abs(mean - exact) < 3.0 * sd);
    }
    SUBCASE("convex in f: midpoint inequality on random quadruples") {
        Rng rng(7);
        for (int rep = 0; rep < 100; ++rep) {
            const int k = 2 + rng.uniform_int(4);
            const SimplexCode c(k);
            const CostMatrix cm = random_costs(rng, k);
            const ClassDistribution p = dirichlet(rng, k);
            std::vector<double> f1(c.dim()), f2(c.dim()), mid(c.dim());
            for (std::size_t r = 0; r < c.dim(); ++r) {
                f1[r] = 3.0 * rng.normal();
                f2[r] = 3.0 * rng.normal();
                mid[r] = 0.5 * (f1[r] + f2[r]);
            }
            const MarginLoss losses[] = {MarginLoss::exponential(), MarginLoss::logit(),
                                         MarginLoss::lmum(1.0, 0.0)};
            for (const MarginLoss& loss : losses) {
                const double lhs = angleboost::conditional_risk(c, cm, loss, p, mid);
                const double rhs = 0.5 * (angleboost::conditional_risk(c, cm, loss, p, f1) +
                                          angleboost::conditional_risk(c, cm, loss, p, f2));
                CHECK(lhs <= rhs + 1e-10);
            }
        }
    }
}

TEST_CASE("conditional risk minimizer") {
    SUBCASE("uniform p with 0/1 costs is minimized at f = 0") {
        const SimplexCode code(3);
        const CostMatrix costs = builtin_cost("zero_one", 3);
        const ClassDistribution p({1.0 / 3, 1.0 / 3, 1.0 / 3});
        const auto rm = angleboost::minimize_conditional_risk(code, costs, MarginLoss::logit(), p);
        CHECK(rm.converged);
        for (double v : rm.f_star) CHECK(std::abs(v) < 1e-8);
        const std::vector<double> zero(code.dim(), 0.0);
        CHECK(rm.achieved_risk ==
              doctest::Approx(angleboost::conditional_risk(code, costs, MarginLoss::logit(), p, zero))
                  .epsilon(1e-12));
    }
    SUBCASE("K=2 exponential closed form: <f*, w1> = (1/2) log(P1/P2)") {
        const SimplexCode code(2);
        const CostMatrix costs = builtin_cost("zero_one", 2);
        const ClassDistribution p({0.75, 0.25});
        const auto rm = angleboost::minimize_conditional_risk(code, costs, MarginLoss::exponential(), p);
        CHECK(rm.converged);
        CHECK(code.score(rm.f_star, 1) == doctest::Approx(0.5 * std::log(3.0)).epsilon(1e-6));
    }
    SUBCASE("K=3 exponential scores match the closed form in the probabilities") {
        const SimplexCode code(3);
        const CostMatrix costs = builtin_cost("zero_one", 3);
        Rng rng(13);
        for (int rep = 0; rep < 20; ++rep) {
            const ClassDistribution p = dirichlet(rng, 3);
            bool extreme = false;
            for (double v : p.values()) extreme |= v < 0.02;
            if (extreme) continue;
            const auto rm =
                angleboost::minimize_conditional_risk(code, costs, MarginLoss::exponential(), p);
            REQUIRE(rm.converged);
            double log_term = 0.0;
            for (double v : p.values()) log_term += std::log(1.0 - v);
            log_term /= 3.0;
            for (int t = 1; t <= 3; ++t) {
                const double expected = log_term - std::log(1.0 - p.prob(t));
                CHECK(std::abs(code.score(rm.f_star, t) - expected) < 1e-4);
            }
        }
    }
    SUBCASE("minimizer result invariants") {
        Rng rng(83);
        for (int rep = 0; rep < 20; ++rep) {
            const int k = 2 + rng.uniform_int(4);
            const SimplexCode code(k);
            const CostMatrix costs = random_costs(rng, k);
            const ClassDistribution p = dirichlet(rng, k);
            const MarginLoss loss = rep % 2 ? MarginLoss::logit() : MarginLoss::exponential();
            const auto rm = angleboost::minimize_conditional_risk(code, costs, loss, p);

            const std::vector<double> zero(code.dim(), 0.0);
            CHECK(rm.achieved_risk <=
                  angleboost::conditional_risk(code, costs, loss, p, zero) + 1e-12);
            CHECK(rm.achieved_risk ==
                  doctest::Approx(angleboost::conditional_risk(code, costs, loss, p, rm.f_star))
                      .epsilon(1e-12));
            if (rm.converged) {
                // converged means the gradient norm fell below the tolerance
                const std::vector<double> e = angleboost::expected_costs(costs, p);
                std::vector<double> grad(code.dim(), 0.0);
                for (int t = 1; t <= k; ++t) {
                    const double w = -e[static_cast<std::size_t>(t - 1)] *
                                     loss.derivative(-code.score(rm.f_star, t));
                    for (std::size_t r = 0; r < code.dim(); ++r) grad[r] += w * code.vertex(t)[r];
                }
                double gn = 0.0;
                for (double g : grad) gn += g * g;
                CHECK(std::sqrt(gn) <= 1e-9);
            }
        }
    }
    SUBCASE("stationarity weights agree across classes at f*") {
        Rng rng(17);
        const MarginLoss losses[] = {MarginLoss::exponential(), MarginLoss::logit(),
                                     MarginLoss::lmum(1.0, 0.0)};
        for (int rep = 0; rep < 15; ++rep) {
            const int k = 2 + rng.uniform_int(4);
            const SimplexCode code(k);
            const CostMatrix costs = random_costs(rng, k);
            const ClassDistribution p = dirichlet(rng, k);
            for (const MarginLoss& loss : losses) {
                const auto rm = angleboost::minimize_conditional_risk(code, costs, loss, p);
                if (!rm.converged) continue;
                const std::vector<double> e = angleboost::expected_costs(costs, p);
                double lo = 1e300, hi = -1e300;
                for (int t = 1; t <= k; ++t) {
                    const double w = -e[static_cast<std::size_t>(t - 1)] *
                                     loss.derivative(-code.score(rm.f_star, t));
                    lo = std::min(lo, w);
                    hi = std::max(hi, w);
                }
                CHECK(hi - lo < 1e-4);
            }
        }
    }
}

TEST_CASE("expected costs recovered from f*") {
    SUBCASE("exponential recovery is proportional to e^{-score}") {
        const SimplexCode code(3);
        const CostMatrix costs = builtin_cost("sim1", 3);
        const std::vector<double> f{0.8, -0.3};
        const auto costs_hat =
            angleboost::expected_costs_from_f(code, costs, MarginLoss::exponential(), f);
        const auto s = code.scores(f);
        const double ratio0 = costs_hat[0] / std::exp(-s[0]);
        for (std::size_t t = 1; t < 3; ++t)
            CHECK(costs_hat[t] / std::exp(-s[t]) == doctest::Approx(ratio0).epsilon(1e-10));
    }
    SUBCASE("f* = 0 with 0/1 costs gives (K-1)/K everywhere") {
        for (int k : {2, 3, 5}) {
            const SimplexCode code(k);
            const CostMatrix costs = builtin_cost("zero_one", k);
            const std::vector<double> zero(code.dim(), 0.0);
            const auto e = angleboost::expected_costs_from_f(code, costs, MarginLoss::logit(), zero);
            for (double v : e)
                CHECK(v == doctest::Approx((k - 1.0) / k).epsilon(1e-10));
        }
    }
    SUBCASE("round trip against direct expected costs") {
        const SimplexCode code(3);
        const CostMatrix costs = builtin_cost("sim1", 3);
        Rng rng(29);
        for (int rep = 0; rep < 10; ++rep) {
            const ClassDistribution p = dirichlet(rng, 3);
            const auto rm =
                angleboost::minimize_conditional_risk(code, costs, MarginLoss::exponential(), p);
            REQUIRE(rm.converged);
            const auto direct = angleboost::expected_costs(costs, p);
            const auto recovered =
                angleboost::expected_costs_from_f(code, costs, MarginLoss::exponential(), rm.f_star);
            for (int t = 0; t < 3; ++t)
                CHECK(std::abs(direct[static_cast<std::size_t>(t)] -
                               recovered[static_cast<std::size_t>(t)]) < 1e-3);
        }
    }
}

TEST_CASE("probability recovery") {
    SUBCASE("f* = 0 with 0/1 costs recovers the uniform distribution") {
        const SimplexCode code(4);
        const CostMatrix costs = builtin_cost("zero_one", 4);
        const std::vector<double> zero(code.dim(), 0.0);
        const auto p = angleboost::recover_probabilities(code, costs, MarginLoss::exponential(), zero);
        for (int t = 1; t <= 4; ++t) CHECK(p.prob(t) == doctest::Approx(0.25).epsilon(1e-12));
    }
    SUBCASE("K=2 exponential at f = [log(3)/2] recovers (0.75, 0.25)") {
        const SimplexCode code(2);
        const CostMatrix costs = builtin_cost("zero_one", 2);
        const std::vector<double> f{0.5 * std::log(3.0)};
        const auto p = angleboost::recover_probabilities(code, costs, MarginLoss::exponential(), f);
        CHECK(p.prob(1) == doctest::Approx(0.75).epsilon(1e-12));
        CHECK(p.prob(2) == doctest::Approx(0.25).epsilon(1e-12));
    }
    SUBCASE("0/1 recovery at a minimizer lies strictly inside (0,1)") {
        Rng rng(31);
        for (int rep = 0; rep < 15; ++rep) {
            const int k = 2 + rng.uniform_int(5);
            const SimplexCode code(k);
            const CostMatrix costs = builtin_cost("zero_one", k);
            const ClassDistribution p = dirichlet(rng, k);
            const MarginLoss losses[] = {MarginLoss::exponential(), MarginLoss::logit(),
                                         MarginLoss::lmum(1.0, 0.0)};
            for (const MarginLoss& loss : losses) {
                const auto rm = angleboost::minimize_conditional_risk(code, costs, loss, p);
                const auto rec = angleboost::recover_probabilities(code, costs, loss, rm.f_star);
                for (int t = 1; t <= k; ++t) {
                    CHECK(rec.prob(t) > 0.0);
                    CHECK(rec.prob(t) < 1.0);
                }
            }
        }
    }
    SUBCASE("round trip p -> f* -> p within 1e-3, four-class benchmark matrix") {
        const SimplexCode code(4);
        const CostMatrix costs = builtin_cost("sim2", 4);
        Rng rng(37);
        for (int rep = 0; rep < 10; ++rep) {
            const ClassDistribution p = dirichlet(rng, 4);
            const auto rm = angleboost::minimize_conditional_risk(code, costs, MarginLoss::logit(), p);
            REQUIRE(rm.converged);
            const auto recovered =
                angleboost::recover_probabilities(code, costs, MarginLoss::logit(), rm.f_star);
            for (int t = 1; t <= 4; ++t)
                CHECK(std::abs(recovered.prob(t) - p.prob(t)) < 1e-3);
        }
    }
    SUBCASE("singular cost matrix is reported") {
        const SimplexCode code(3);
        Matrix m(3, 3);
        // rows 2 and 3 identical -> C^T singular
        const double values[3][3] = {{0, 1, 1}, {1, 0, 0}, {1, 0, 0}};
        for (int j = 0; j < 3; ++j)
            for (int t = 0; t < 3; ++t)
                m(static_cast<std::size_t>(j), static_cast<std::size_t>(t)) = values[j][t];
        const CostMatrix costs(3, std::move(m));
        const std::vector<double> f{0.2, 0.1};
        CHECK_THROWS_WITH_AS(
            (void)angleboost::recover_probabilities(code, costs, MarginLoss::exponential(), f),
            doctest::Contains("singular"), std::runtime_error);
    }
}

TEST_CASE("fisher consistency checks") {
    SUBCASE("exponential, K=3, 0/1 costs") {
        const SimplexCode code(3);
        const CostMatrix costs = builtin_cost("zero_one", 3);
        const auto report =
            angleboost::check_fisher_consistency(code, costs, MarginLoss::exponential(), 200, 7);
        CHECK(report.pass_rate == 1.0);
        CHECK(report.trials.size() == 200);
    }
    SUBCASE("logit, K=4, four-class benchmark matrix") {
        const SimplexCode code(4);
        const CostMatrix costs = builtin_cost("sim2", 4);
        const auto report =
            angleboost::check_fisher_consistency(code, costs, MarginLoss::logit(), 200, 11);
        CHECK(report.pass_rate == 1.0);
    }
    SUBCASE("sampled distributions respect the Bayes margin") {
        const SimplexCode code(3);
        const CostMatrix costs = builtin_cost("sim1", 3);
        const auto report =
            angleboost::check_fisher_consistency(code, costs, MarginLoss::exponential(), 50, 3);
        for (const auto& trial : report.trials) {
            std::vector<double> e =
                angleboost::expected_costs(costs, ClassDistribution(trial.p));
            std::sort(e.begin(), e.end());
            CHECK(e[1] - e[0] > 0.02);
        }
    }
    SUBCASE("deterministic and thread-count independent") {
        const SimplexCode code(3);
        const CostMatrix costs = builtin_cost("zero_one", 3);
        const auto a =
            angleboost::check_fisher_consistency(code, costs, MarginLoss::logit(), 40, 5, 1);
        const auto b =
            angleboost::check_fisher_consistency(code, costs, MarginLoss::logit(), 40, 5, 2);
        REQUIRE(a.trials.size() == b.trials.size());
        for (std::size_t i = 0; i < a.trials.size(); ++i) {
            CHECK(a.trials[i].p == b.trials[i].p);
            CHECK(a.trials[i].predicted_class == b.trials[i].predicted_class);
        }
    }
    SUBCASE("non-admissible squared loss fails as a negative control") {
        const SimplexCode code(3);
        const CostMatrix costs = builtin_cost("zero_one", 3);
        const auto report = angleboost::check_fisher_consistency(code, costs, SquaredLoss{}, 100, 19);
        CHECK(report.pass_rate < 1.0);
        CHECK(!report.failures().empty());
    }
}
