#pragma once

#include "rfx/core.hpp"
#include "rfx/rng.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace rfx {

/// Time-inhomogeneous transition kernel P_h(s'|s,a) together with the initial
/// state distribution mu1. Rows are stored explicitly per step h.
struct TransitionKernel {
    MdpSpec spec;
    std::vector<double> p;   // [h][s][a][s']
    std::vector<double> mu1; // [s]

    TransitionKernel() = default;
    explicit TransitionKernel(const MdpSpec& sp)
        : spec(sp), p(sp.size_hsas(), 0.0), mu1(sp.num_states, 0.0) {
        spec.validate();
    }

    double operator()(int h, int s, int a, int s2) const { return p[spec.hsas(h, s, a, s2)]; }
    double& operator()(int h, int s, int a, int s2) { return p[spec.hsas(h, s, a, s2)]; }
    const double* row(int h, int s, int a) const { return p.data() + spec.hsas(h, s, a, 0); }
};

/// Per-step reward r_h(s,a) in [0, b_max]. b_max defaults to 1; values above 1
/// appear only for internally constructed planning rewards.
struct RewardFunction {
    MdpSpec spec;
    std::vector<double> r; // [h][s][a]
    double b_max = 1.0;

    RewardFunction() = default;
    explicit RewardFunction(const MdpSpec& sp, double fill = 0.0, double bound = 1.0)
        : spec(sp), r(sp.size_hsa(), fill), b_max(bound) {
        spec.validate();
    }

    double operator()(int h, int s, int a) const { return r[spec.hsa(h, s, a)]; }
    double& operator()(int h, int s, int a) { return r[spec.hsa(h, s, a)]; }
};

/// Markov policy pi_h(a|s); each (h,s) row is a distribution over actions.
struct MarkovPolicy {
    MdpSpec spec;
    std::vector<double> pi; // [h][s][a]

    MarkovPolicy() = default;
    explicit MarkovPolicy(const MdpSpec& sp, double fill = 0.0)
        : spec(sp), pi(sp.size_hsa(), fill) {
        spec.validate();
    }

    /// Uniform policy 1/|A| everywhere.
    static MarkovPolicy uniform(const MdpSpec& sp) {
        return MarkovPolicy(sp, 1.0 / sp.num_actions);
    }

    /// Deterministic policy from an action table [h][s].
    static MarkovPolicy deterministic(const MdpSpec& sp, const std::vector<int>& actions) {
        MarkovPolicy out(sp);
        for (int h = 0; h < sp.horizon; ++h)
            for (int s = 0; s < sp.num_states; ++s)
                out(h, s, actions[sp.hs(h, s)]) = 1.0;
        return out;
    }

    double operator()(int h, int s, int a) const { return pi[spec.hsa(h, s, a)]; }
    double& operator()(int h, int s, int a) { return pi[spec.hsa(h, s, a)]; }
    const double* row(int h, int s) const { return pi.data() + spec.hsa(h, s, 0); }
};

/// Backward-recursion output: V indexed by (h,s), Q by (h,s,a). V_{H+1} == 0
/// is implicit and never stored.
struct ValueTable {
    MdpSpec spec;
    std::vector<double> v; // [h][s]
    std::vector<double> q; // [h][s][a]

    ValueTable() = default;
    explicit ValueTable(const MdpSpec& sp)
        : spec(sp), v(sp.size_hs(), 0.0), q(sp.size_hsa(), 0.0) {}

    double value(int h, int s) const { return v[spec.hs(h, s)]; }
    double qvalue(int h, int s, int a) const { return q[spec.hsa(h, s, a)]; }

    /// Initial-state average of V_1 under mu1.
    double initial_value(const std::vector<double>& mu1) const {
        double out = 0.0;
        for (int s = 0; s < spec.num_states; ++s)
            out += mu1[s] * v[spec.hs(0, s)];
        return out;
    }
};

/// One episode: states s_1..s_{H+1} and actions a_1..a_H.
struct Trajectory {
    std::vector<int> states;  // length H+1
    std::vector<int> actions; // length H

    int horizon() const { return static_cast<int>(actions.size()); }
};

struct KernelViolation {
    int h, s, a;       // a == -1 marks the initial distribution
    double row_sum;    // NaN when the issue is a negative entry
    double bad_entry;  // the offending value for negativity reports
    std::string what;
};

/// Report-only stochasticity check: rows must sum to 1 within 1e-9 and be
/// nonnegative; same for mu1.
inline std::vector<KernelViolation> validate_kernel(const TransitionKernel& k) {
    std::vector<KernelViolation> out;
    const MdpSpec& sp = k.spec;
    double mu_sum = 0.0;
    for (int s = 0; s < sp.num_states; ++s) {
        if (k.mu1[s] < 0.0)
            out.push_back({0, s, -1, std::nan(""), k.mu1[s], "negative mu1 entry"});
        mu_sum += k.mu1[s];
    }
    if (std::abs(mu_sum - 1.0) > 1e-9)
        out.push_back({0, 0, -1, mu_sum, 0.0, "mu1 does not sum to 1"});
    for (int h = 0; h < sp.horizon; ++h)
        for (int s = 0; s < sp.num_states; ++s)
            for (int a = 0; a < sp.num_actions; ++a) {
                double sum = 0.0;
                bool neg = false;
                double bad = 0.0;
                for (int s2 = 0; s2 < sp.num_states; ++s2) {
                    const double x = k(h, s, a, s2);
                    if (x < 0.0 && !neg) {
                        neg = true;
                        bad = x;
                    }
                    sum += x;
                }
                if (neg)
                    out.push_back({h, s, a, std::nan(""), bad, "negative transition entry"});
                if (std::abs(sum - 1.0) > 1e-9)
                    out.push_back({h, s, a, sum, 0.0, "row does not sum to 1"});
            }
    return out;
}

namespace detail {
inline void require_same_spec(const MdpSpec& a, const MdpSpec& b, const char* where) {
    if (a != b)
        throw config_error(std::string(where) + ": inputs disagree on MDP dimensions");
}
} // namespace detail

/// Policy evaluation by backward recursion:
///   Q_h(s,a) = r_h(s,a) + sum_{s'} P_h(s'|s,a) V_{h+1}(s'),
///   V_h(s)   = sum_a pi_h(a|s) Q_h(s,a).
inline ValueTable dp_policy_eval(const TransitionKernel& kernel, const RewardFunction& reward,
                                 const MarkovPolicy& policy) {
    detail::require_same_spec(kernel.spec, reward.spec, "dp_policy_eval");
    detail::require_same_spec(kernel.spec, policy.spec, "dp_policy_eval");
    const MdpSpec& sp = kernel.spec;
    ValueTable out(sp);
    for (int h = sp.horizon - 1; h >= 0; --h) {
        const double* vnext = (h + 1 < sp.horizon) ? out.v.data() + sp.hs(h + 1, 0) : nullptr;
        for (int s = 0; s < sp.num_states; ++s) {
            double vs = 0.0;
            for (int a = 0; a < sp.num_actions; ++a) {
                double cont = 0.0;
                if (vnext) {
                    const double* row = kernel.row(h, s, a);
                    for (int s2 = 0; s2 < sp.num_states; ++s2)
                        cont += row[s2] * vnext[s2];
                }
                const double qv = reward(h, s, a) + cont;
                out.q[sp.hsa(h, s, a)] = qv;
                vs += policy(h, s, a) * qv;
            }
            out.v[sp.hs(h, s)] = vs;
        }
    }
    return out;
}

/// Bellman optimality recursion. The returned policy is deterministic greedy;
/// ties break toward the lowest action index so output is reproducible.
inline std::pair<ValueTable, MarkovPolicy> dp_optimal(const TransitionKernel& kernel,
                                                      const RewardFunction& reward) {
    detail::require_same_spec(kernel.spec, reward.spec, "dp_optimal");
    const MdpSpec& sp = kernel.spec;
    ValueTable out(sp);
    MarkovPolicy greedy(sp);
    for (int h = sp.horizon - 1; h >= 0; --h) {
        const double* vnext = (h + 1 < sp.horizon) ? out.v.data() + sp.hs(h + 1, 0) : nullptr;
        for (int s = 0; s < sp.num_states; ++s) {
            double best = 0.0;
            int best_a = 0;
            for (int a = 0; a < sp.num_actions; ++a) {
                double cont = 0.0;
                if (vnext) {
                    const double* row = kernel.row(h, s, a);
                    for (int s2 = 0; s2 < sp.num_states; ++s2)
                        cont += row[s2] * vnext[s2];
                }
                const double qv = reward(h, s, a) + cont;
                out.q[sp.hsa(h, s, a)] = qv;
                if (a == 0 || qv > best) {
                    best = qv;
                    best_a = a;
                }
            }
            out.v[sp.hs(h, s)] = best;
            greedy(h, s, best_a) = 1.0;
        }
    }
    return {std::move(out), std::move(greedy)};
}

/// Rolls one episode: s_1 ~ mu1, a_h ~ pi_h(.|s_h), s_{h+1} ~ P_h(.|s_h,a_h).
/// Bit-reproducible for a fixed seed.
inline Trajectory sample_trajectory(const TransitionKernel& kernel, const MarkovPolicy& policy,
                                    RandomSeed seed) {
    detail::require_same_spec(kernel.spec, policy.spec, "sample_trajectory");
    const MdpSpec& sp = kernel.spec;
    Rng rng(seed);
    Trajectory tr;
    tr.states.reserve(sp.horizon + 1);
    tr.actions.reserve(sp.horizon);
    int s = rng.categorical(kernel.mu1);
    tr.states.push_back(s);
    for (int h = 0; h < sp.horizon; ++h) {
        const int a = rng.categorical(policy.row(h, s), sp.num_actions);
        tr.actions.push_back(a);
        s = rng.categorical(kernel.row(h, s, a), sp.num_states);
        tr.states.push_back(s);
    }
    return tr;
}

} // namespace rfx
