#pragma once

#include "rfx/confidence.hpp"
#include "rfx/estimator.hpp"

#include <cmath>
#include <cstdint>
#include <vector>

namespace rfx {

/// Penalty configuration for pessimistic planning. Theory defaults are the
/// constants the analysis pins (c_a = 48, c_f = 64); the practical profile may
/// run smaller constants, which are recorded alongside the plan.
struct PenaltyKind {
    ExplorationSetting setting = ExplorationSetting::reward_agnostic;
    double constant = 48.0;         // c_a or c_f
    std::int64_t class_size = 1;    // RAE only; enters through ell0

    static PenaltyKind rae_theory(std::int64_t class_size = 1) {
        return {ExplorationSetting::reward_agnostic, 48.0, class_size};
    }
    static PenaltyKind rfe_theory() { return {ExplorationSetting::reward_free, 64.0, 1}; }
    static PenaltyKind rae_practical(double c, std::int64_t class_size = 1) {
        return {ExplorationSetting::reward_agnostic, c, class_size};
    }
    static PenaltyKind rfe_practical(double c) {
        return {ExplorationSetting::reward_free, c, 1};
    }
};

/// Var_rho(V) = sum rho V^2 - (sum rho V)^2, clamped below at zero.
/// Sub-stochastic rows are permitted.
inline double variance(const double* rho, const double* values, int n) {
    double m1 = 0.0, m2 = 0.0;
    for (int i = 0; i < n; ++i) {
        m1 += rho[i] * values[i];
        m2 += rho[i] * values[i] * values[i];
    }
    const double var = m2 - m1 * m1;
    return var > 0.0 ? var : 0.0;
}

inline double variance(const std::vector<double>& rho, const std::vector<double>& values) {
    return variance(rho.data(), values.data(), static_cast<int>(rho.size()));
}

/// Bernstein-style penalty
///   RAE: min{ sqrt(c_a ell0 Var / n) + c_a H ell0 / n, H }
///   RFE: min{ sqrt(c_f |S| ell0 Var / n) + c_f |S| H ell0 / n, H }.
/// Zero visits collapse to the clamp value H. In the RAE setting the reward
/// class enters only through ell0, as an additive ln(class size) term.
inline double bernstein_penalty(const PenaltyKind& kind, std::int64_t n,
                                const double* p_hat_row, const double* v_next, int num_states,
                                double ell0, int horizon) {
    const double h = static_cast<double>(horizon);
    if (n <= 0)
        return h;
    double scale = kind.constant;
    if (kind.setting == ExplorationSetting::reward_free)
        scale *= num_states;
    else if (kind.class_size > 1)
        ell0 += std::log(static_cast<double>(kind.class_size));
    const double var = variance(p_hat_row, v_next, num_states);
    const double nn = static_cast<double>(n);
    const double b = std::sqrt(scale * ell0 * var / nn) + scale * h * ell0 / nn;
    return b < h ? b : h;
}

/// Output of pessimistic planning: penalties, pessimistic value tables and the
/// greedy policy of the penalized empirical MDP.
struct PessimisticPlan {
    MdpSpec spec;
    std::vector<double> penalty; // [h][s][a]
    ValueTable values;           // Qhat / Vhat
    MarkovPolicy policy;         // deterministic greedy, lowest-index ties
    PenaltyKind kind;
};

/// Backward pass h = H..1 of the penalized empirical MDP:
///   Qhat_h(s,a) = max{ r_h(s,a) + P_hat_h(.|s,a) Vhat_{h+1} - b_h(s,a), 0 }.
/// All-zero empirical rows contribute no continuation and carry b = H; rows
/// are used verbatim, never renormalized.
inline PessimisticPlan pessimistic_plan(const RewardFunction& reward, const EmpiricalModel& model,
                                        const VisitCounts& counts, const PenaltyKind& kind) {
    detail::require_same_spec(reward.spec, model.spec, "pessimistic_plan");
    detail::require_same_spec(reward.spec, counts.spec, "pessimistic_plan");
    for (double v : reward.r)
        if (v < 0.0 || v > 1.0)
            throw config_error("pessimistic_plan: reward entries must lie in [0,1]");
    const MdpSpec& sp = reward.spec;
    PessimisticPlan plan;
    plan.spec = sp;
    plan.kind = kind;
    plan.penalty.assign(sp.size_hsa(), 0.0);
    plan.values = ValueTable(sp);
    plan.policy = MarkovPolicy(sp);

    std::vector<double> v_next(sp.num_states, 0.0);
    for (int h = sp.horizon - 1; h >= 0; --h) {
        for (int s = 0; s < sp.num_states; ++s) {
            double best = 0.0;
            int best_a = 0;
            for (int a = 0; a < sp.num_actions; ++a) {
                const std::size_t row = sp.hsa(h, s, a);
                const double* p_row = model.p_hat.data() + row * sp.num_states;
                const double b = bernstein_penalty(kind, counts.n_sa[row], p_row, v_next.data(),
                                                   sp.num_states, model.ell0, sp.horizon);
                plan.penalty[row] = b;
                double cont = 0.0;
                for (int s2 = 0; s2 < sp.num_states; ++s2)
                    cont += p_row[s2] * v_next[s2];
                const double q = std::max(reward(h, s, a) + cont - b, 0.0);
                plan.values.q[row] = q;
                if (a == 0 || q > best) {
                    best = q;
                    best_a = a;
                }
            }
            plan.values.v[sp.hs(h, s)] = best;
            plan.policy(h, s, best_a) = 1.0;
        }
        for (int s = 0; s < sp.num_states; ++s)
            v_next[s] = plan.values.v[sp.hs(h, s)];
    }
    return plan;
}

} // namespace rfx
