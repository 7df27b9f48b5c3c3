#include "oracles.hpp"
#include "rfx/harness.hpp"
#include "rfx/planner.hpp"
#include "rfx/random_mdp.hpp"

#include <doctest.h>

#include <cmath>

using namespace rfx;

TEST_CASE("variance: closed forms and extended-precision agreement") {
    CHECK(variance({0.3, 0.7}, {2.0, 2.0}) == doctest::Approx(0.0));
    CHECK(variance({0.5, 0.5}, {0.0, 2.0}) == doctest::Approx(1.0));

    Rng rng(5);
    std::vector<double> rho(6), v(6);
    rng.dirichlet_uniform(rho.data(), 6);
    for (double& x : v)
        x = 5.0 * rng.uniform();
    const double lib = variance(rho, v);
    const long double ref = oracles::variance_ld(rho, v);
    CHECK(std::abs(lib - static_cast<double>(ref)) <= 1e-12);
}

TEST_CASE("variance clamps tiny negatives to zero") {
    // constant V with rounding noise must not go negative
    std::vector<double> rho = {0.25, 0.25, 0.25, 0.25};
    std::vector<double> v = {1.0 + 1e-16, 1.0, 1.0 - 1e-16, 1.0};
    CHECK(variance(rho, v) >= 0.0);
}

TEST_CASE("bernstein penalty: zero data clamps to H") {
    const PenaltyKind kind = PenaltyKind::rae_theory();
    std::vector<double> row = {0.0, 0.0};
    std::vector<double> v = {0.0, 0.0};
    CHECK(bernstein_penalty(kind, 0, row.data(), v.data(), 2, 3.0, 5) == 5.0);
}

TEST_CASE("bernstein penalty: direct arithmetic of the RAE formula") {
    // Var = 0, n = 10, c_a = 48, ell0 = 1, H = 5: min{24, 5} = 5
    const PenaltyKind kind = PenaltyKind::rae_theory();
    std::vector<double> row = {1.0, 0.0};
    std::vector<double> v = {2.0, 2.0}; // constant -> zero variance
    CHECK(bernstein_penalty(kind, 10, row.data(), v.data(), 2, 1.0, 5) == 5.0);

    // un-clamped case: n large enough that the formula applies directly
    const std::int64_t n = 1000;
    std::vector<double> v2 = {0.0, 2.0};
    std::vector<double> row2 = {0.5, 0.5};
    const double var = 1.0;
    const double expected = std::sqrt(48.0 * 1.0 * var / n) + 48.0 * 5.0 * 1.0 / n;
    CHECK(bernstein_penalty(kind, n, row2.data(), v2.data(), 2, 1.0, 5) ==
          doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("bernstein penalty: RFE dominates RAE when c_f |S| > c_a") {
    const PenaltyKind rae = PenaltyKind::rae_theory();
    const PenaltyKind rfe = PenaltyKind::rfe_theory();
    std::vector<double> row = {0.4, 0.6};
    std::vector<double> v = {1.0, 3.0};
    for (std::int64_t n : {10, 100, 10000, 1000000})
        CHECK(bernstein_penalty(rfe, n, row.data(), v.data(), 2, 2.0, 5) >=
              bernstein_penalty(rae, n, row.data(), v.data(), 2, 2.0, 5));
}

TEST_CASE("bernstein penalty is nonincreasing in n") {
    const PenaltyKind kind = PenaltyKind::rae_practical(2.0);
    std::vector<double> row = {0.3, 0.7};
    std::vector<double> v = {0.5, 2.5};
    double prev = 1e300;
    for (std::int64_t n : {1, 2, 5, 20, 100, 1000, 100000}) {
        const double b = bernstein_penalty(kind, n, row.data(), v.data(), 2, 2.0, 4);
        CHECK(b <= prev + 1e-15);
        prev = b;
    }
}

TEST_CASE("RAE class size enters only through ell0") {
    std::vector<double> row = {0.3, 0.7};
    std::vector<double> v = {0.5, 2.5};
    const PenaltyKind one = PenaltyKind::rae_practical(2.0, 1);
    const PenaltyKind many = PenaltyKind::rae_practical(2.0, 8);
    const double b_one =
        bernstein_penalty(one, 500, row.data(), v.data(), 2, 2.0 + std::log(8.0), 4);
    const double b_many = bernstein_penalty(many, 500, row.data(), v.data(), 2, 2.0, 4);
    CHECK(b_one == doctest::Approx(b_many).epsilon(1e-14));
}

TEST_CASE("pessimistic plan reduces to exact planning with perfect model") {
    const MdpSpec sp{3, 2, 4};
    const TransitionKernel env = random_mdp(sp, 3);
    const RewardFunction r = random_reward(sp, 4);

    EmpiricalModel model;
    model.spec = sp;
    model.ell0 = 1.0;
    model.p_hat = env.p;
    model.radius.assign(sp.size_hsas(), 0.0);
    VisitCounts counts(sp);
    // force b = 0 by a penalty constant of zero and huge counts
    for (auto& n : counts.n_sa)
        n = 1;
    PenaltyKind kind = PenaltyKind::rae_practical(0.0);
    const PessimisticPlan plan = pessimistic_plan(r, model, counts, kind);
    const auto [vstar, pistar] = dp_optimal(env, r);
    for (std::size_t i = 0; i < plan.values.v.size(); ++i)
        CHECK(std::abs(plan.values.v[i] - vstar.v[i]) <= 1e-10);
    for (std::size_t i = 0; i < plan.policy.pi.size(); ++i)
        CHECK(plan.policy.pi[i] == pistar.pi[i]); // identical lowest-index ties
}

TEST_CASE("pessimistic plan with no data is fully clamped") {
    const MdpSpec sp{3, 2, 3};
    const TransitionKernel env = random_mdp(sp, 7);
    const RewardFunction r = random_reward(sp, 8);
    VisitCounts counts(sp);
    const EmpiricalModel model = empirical_model(counts, 2.0);
    const PessimisticPlan plan = pessimistic_plan(r, model, counts, PenaltyKind::rae_theory());
    for (std::size_t i = 0; i < plan.penalty.size(); ++i)
        CHECK(plan.penalty[i] == sp.horizon);
    for (double q : plan.values.q)
        CHECK(q == 0.0);
    for (double v : plan.values.v)
        CHECK(v == 0.0);
    for (int h = 0; h < sp.horizon; ++h)
        for (int s = 0; s < sp.num_states; ++s)
            CHECK(plan.policy(h, s, 0) == 1.0); // lowest-index everywhere
}

TEST_CASE("Qhat range stays within the structural bounds") {
    const MdpSpec sp{3, 2, 4};
    const TransitionKernel env = random_mdp(sp, 9);
    const RewardFunction r = random_reward(sp, 10);
    const EstimationResult est = baseline_uniform(env, 500, 11, 2.0);
    const PessimisticPlan plan =
        pessimistic_plan(r, est.model, est.counts, PenaltyKind::rae_practical(1.0));
    for (std::size_t i = 0; i < plan.values.q.size(); ++i) {
        CHECK(plan.values.q[i] >= 0.0);
        CHECK(plan.values.q[i] <= 1.0 + sp.horizon);
        CHECK(plan.values.q[i] <= sp.horizon * r.b_max);
    }
    for (int h = 0; h < sp.horizon; ++h)
        for (int s = 0; s < sp.num_states; ++s) {
            double best = 0.0;
            for (int a = 0; a < sp.num_actions; ++a)
                best = std::max(best, plan.values.qvalue(h, s, a));
            CHECK(plan.values.value(h, s) == doctest::Approx(best));
        }
}

TEST_CASE("penalties never grow with more data") {
    const MdpSpec sp{3, 2, 3};
    const TransitionKernel env = random_mdp(sp, 12);
    const RewardFunction r = random_reward(sp, 13);
    const EstimationResult small = baseline_uniform(env, 300, 14, 2.0);
    EstimationResult large = small;
    {
        // extend the same stream: identical prefix plus more episodes
        const EstimationResult big = baseline_uniform(env, 1200, 14, 2.0);
        large = big;
    }
    const PenaltyKind kind = PenaltyKind::rae_practical(1.0);
    const PessimisticPlan p_small = pessimistic_plan(r, small.model, small.counts, kind);
    const PessimisticPlan p_large = pessimistic_plan(r, large.model, large.counts, kind);
    // counts grow pointwise on this shared stream; spot-check the clamp rule:
    // zero-count rows keep b = H, others stay within [0, H]
    for (std::size_t i = 0; i < p_small.penalty.size(); ++i) {
        CHECK(p_small.penalty[i] <= sp.horizon);
        CHECK(p_large.penalty[i] <= sp.horizon);
        if (small.counts.n_sa[i] == 0)
            CHECK(p_small.penalty[i] == sp.horizon);
    }
}

TEST_CASE("pessimism is deterministic once the penalties cover the model error") {
    // whenever |(P_hat - P) Vhat_{h+1}| <= b_h(s,a) holds at every triple of a
    // realized run, the lower-bound chain follows with no probability left
    const MdpSpec sp{3, 2, 3};
    const double ell0 = log_factor(sp, 0.1, 0.1);
    int covered_runs = 0;
    for (int run = 0; run < 40; ++run) {
        const TransitionKernel env = random_mdp(sp, 100 + run);
        const RewardFunction r = random_reward(sp, 200 + run);
        const EstimationResult est = baseline_uniform(env, 1500, 300 + run, ell0);
        const PessimisticPlan plan =
            pessimistic_plan(r, est.model, est.counts, PenaltyKind::rae_practical(0.5));

        bool event_holds = true;
        std::vector<double> v_next(sp.num_states, 0.0);
        for (int h = sp.horizon - 1; h >= 0 && event_holds; --h) {
            for (int s = 0; s < sp.num_states && event_holds; ++s)
                for (int a = 0; a < sp.num_actions; ++a) {
                    const std::size_t row = sp.hsa(h, s, a);
                    double err = 0.0;
                    for (int s2 = 0; s2 < sp.num_states; ++s2)
                        err += (est.model.p_hat[row * sp.num_states + s2] -
                                env.p[row * sp.num_states + s2]) *
                               v_next[s2];
                    if (std::abs(err) > plan.penalty[row]) {
                        event_holds = false;
                        break;
                    }
                }
            for (int s = 0; s < sp.num_states; ++s)
                v_next[s] = plan.values.value(h, s);
        }
        if (!event_holds)
            continue;
        ++covered_runs;
        const ValueTable truth = dp_policy_eval(env, r, plan.policy);
        for (int h = 0; h < sp.horizon; ++h)
            for (int s = 0; s < sp.num_states; ++s)
                CHECK(plan.values.value(h, s) <= truth.value(h, s) + 1e-9);
    }
    CHECK(covered_runs > 0); // the event actually fires at these sizes
}

TEST_CASE("pessimism holds under the true kernel (statistical)") {
    const MdpSpec sp{3, 2, 3};
    const TransitionKernel env = random_mdp(sp, 15);
    const RewardFunction r = random_reward(sp, 16);
    const double ell0 = log_factor(sp, 0.1, 0.1);
    int held = 0;
    const int runs = 60;
    for (int run = 0; run < runs; ++run) {
        const EstimationResult est = baseline_uniform(env, 2000, 5000 + run, ell0);
        const PessimisticPlan plan =
            pessimistic_plan(r, est.model, est.counts, PenaltyKind::rae_practical(0.5));
        const ValueTable true_value = dp_policy_eval(env, r, plan.policy);
        bool ok = true;
        for (int s = 0; s < sp.num_states; ++s)
            if (plan.values.value(0, s) > true_value.value(0, s) + 1e-9)
                ok = false;
        held += ok;
    }
    CHECK(held >= static_cast<int>(0.95 * runs));
}
