#pragma once

#include "rfx/mdp.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace rfx {

/// Per-step state-action visitation probabilities mu_h(s,a). A valid measure
/// sums to 1 at every h and conserves flow under its generating kernel.
struct OccupancyMeasure {
    MdpSpec spec;
    std::vector<double> mu; // [h][s][a]

    OccupancyMeasure() = default;
    explicit OccupancyMeasure(const MdpSpec& sp, double fill = 0.0)
        : spec(sp), mu(sp.size_hsa(), fill) {}

    double operator()(int h, int s, int a) const { return mu[spec.hsa(h, s, a)]; }
    double& operator()(int h, int s, int a) { return mu[spec.hsa(h, s, a)]; }
};

/// Occupancy over (s, a, s') triples; encodes policy and transition kernel
/// jointly. This is the optimization variable of the online learner.
struct AugmentedOccupancy {
    MdpSpec spec;
    std::vector<double> mu; // [h][s][a][s']

    AugmentedOccupancy() = default;
    explicit AugmentedOccupancy(const MdpSpec& sp, double fill = 0.0)
        : spec(sp), mu(sp.size_hsas(), fill) {}

    /// Uniform start 1/(|S|^2 |A|) on every (h,s,a,s') entry.
    static AugmentedOccupancy uniform(const MdpSpec& sp) {
        const double v = 1.0 / (static_cast<double>(sp.num_states) * sp.num_states * sp.num_actions);
        return AugmentedOccupancy(sp, v);
    }

    double operator()(int h, int s, int a, int s2) const { return mu[spec.hsas(h, s, a, s2)]; }
    double& operator()(int h, int s, int a, int s2) { return mu[spec.hsas(h, s, a, s2)]; }

    /// Marginal over next states: mu_h(s,a) = sum_{s'} mu_h(s,a,s').
    OccupancyMeasure marginal() const {
        OccupancyMeasure out(spec);
        for (std::size_t i = 0; i < out.mu.size(); ++i) {
            double acc = 0.0;
            const double* row = mu.data() + i * spec.num_states;
            for (int s2 = 0; s2 < spec.num_states; ++s2)
                acc += row[s2];
            out.mu[i] = acc;
        }
        return out;
    }
};

/// Membership flags for omega-significant (h,s,a) triples: occupancy strictly
/// above the threshold.
struct SignificanceSet {
    MdpSpec spec;
    double omega = 0.0;
    std::vector<char> member; // [h][s][a]

    bool contains(int h, int s, int a) const { return member[spec.hsa(h, s, a)] != 0; }
    std::size_t count() const {
        std::size_t n = 0;
        for (char c : member)
            n += (c != 0);
        return n;
    }
};

/// Builds the significance set: member iff mu_ref > omega (strict).
inline SignificanceSet significance_set(const OccupancyMeasure& mu_ref, double omega) {
    if (!(omega > 0.0))
        throw config_error("significance_set: omega must be positive");
    SignificanceSet out;
    out.spec = mu_ref.spec;
    out.omega = omega;
    out.member.resize(mu_ref.mu.size(), 0);
    for (std::size_t i = 0; i < mu_ref.mu.size(); ++i)
        out.member[i] = mu_ref.mu[i] > omega ? 1 : 0;
    return out;
}

/// Forward recursion mu_1(s,a) = mu1(s) pi_1(a|s),
/// mu_{h+1}(s',a') = pi_{h+1}(a'|s') sum_{s,a} mu_h(s,a) P_h(s'|s,a).
inline OccupancyMeasure occupancy_from_policy(const TransitionKernel& kernel,
                                              const MarkovPolicy& policy) {
    detail::require_same_spec(kernel.spec, policy.spec, "occupancy_from_policy");
    const MdpSpec& sp = kernel.spec;
    OccupancyMeasure out(sp);
    std::vector<double> state_mass(kernel.mu1);
    for (int h = 0; h < sp.horizon; ++h) {
        for (int s = 0; s < sp.num_states; ++s)
            for (int a = 0; a < sp.num_actions; ++a)
                out(h, s, a) = state_mass[s] * policy(h, s, a);
        if (h + 1 < sp.horizon) {
            std::vector<double> next(sp.num_states, 0.0);
            for (int s = 0; s < sp.num_states; ++s)
                for (int a = 0; a < sp.num_actions; ++a) {
                    const double m = out(h, s, a);
                    if (m == 0.0)
                        continue;
                    const double* row = kernel.row(h, s, a);
                    for (int s2 = 0; s2 < sp.num_states; ++s2)
                        next[s2] += m * row[s2];
                }
            state_mass.swap(next);
        }
    }
    return out;
}

/// Augmented occupancy of a policy under a kernel:
/// mu_h(s,a,s') = mu_h(s,a) P_h(s'|s,a).
inline AugmentedOccupancy augmented_occupancy_from_policy(const TransitionKernel& kernel,
                                                          const MarkovPolicy& policy) {
    const OccupancyMeasure plain = occupancy_from_policy(kernel, policy);
    const MdpSpec& sp = kernel.spec;
    AugmentedOccupancy out(sp);
    for (std::size_t row = 0; row < sp.size_hsa(); ++row)
        for (int s2 = 0; s2 < sp.num_states; ++s2)
            out.mu[row * sp.num_states + s2] = plain.mu[row] * kernel.p[row * sp.num_states + s2];
    return out;
}

/// Induced policy pi_h(a|s) = mu_h(s,a) / sum_{a'} mu_h(s,a'). Rows whose mass
/// falls below 1e-15 become uniform.
inline MarkovPolicy policy_from_occupancy(const OccupancyMeasure& mu) {
    const MdpSpec& sp = mu.spec;
    MarkovPolicy out(sp);
    for (int h = 0; h < sp.horizon; ++h)
        for (int s = 0; s < sp.num_states; ++s) {
            double mass = 0.0;
            for (int a = 0; a < sp.num_actions; ++a)
                mass += mu(h, s, a);
            if (mass < 1e-15) {
                for (int a = 0; a < sp.num_actions; ++a)
                    out(h, s, a) = 1.0 / sp.num_actions;
            } else {
                for (int a = 0; a < sp.num_actions; ++a)
                    out(h, s, a) = mu(h, s, a) / mass;
            }
        }
    return out;
}

/// <mu, r> = sum_{h,s,a} mu_h(s,a) r_h(s,a); the expected return is linear in
/// the occupancy measure.
inline double expected_return(const OccupancyMeasure& mu, const RewardFunction& reward) {
    detail::require_same_spec(mu.spec, reward.spec, "expected_return");
    double acc = 0.0;
    for (std::size_t i = 0; i < mu.mu.size(); ++i)
        acc += mu.mu[i] * reward.r[i];
    return acc;
}

/// Log-barrier exploration objective f(mu) = -sum ln mu_h(s,a). Entries below
/// 1e-300 are clamped so the report stays finite.
inline double log_barrier(const OccupancyMeasure& mu) {
    double acc = 0.0;
    for (double x : mu.mu)
        acc -= std::log(x < 1e-300 ? 1e-300 : x);
    return acc;
}

struct OccupancyViolation {
    int h, s, a;
    double value;
    std::string what;
};

/// Checks structural validity against a reference kernel: per-step
/// normalization, flow conservation, nonnegativity. Report-only.
inline std::vector<OccupancyViolation> validate_occupancy(const OccupancyMeasure& mu,
                                                          const TransitionKernel& kernel,
                                                          double tol = 1e-8) {
    detail::require_same_spec(mu.spec, kernel.spec, "validate_occupancy");
    const MdpSpec& sp = mu.spec;
    std::vector<OccupancyViolation> out;
    for (int h = 0; h < sp.horizon; ++h) {
        double sum = 0.0;
        for (int s = 0; s < sp.num_states; ++s)
            for (int a = 0; a < sp.num_actions; ++a) {
                const double x = mu(h, s, a);
                if (x < -tol)
                    out.push_back({h, s, a, x, "negative occupancy"});
                sum += x;
            }
        if (std::abs(sum - 1.0) > tol)
            out.push_back({h, -1, -1, sum, "per-step mass not 1"});
    }
    for (int h = 0; h + 1 < sp.horizon; ++h)
        for (int s2 = 0; s2 < sp.num_states; ++s2) {
            double inflow = 0.0;
            for (int s = 0; s < sp.num_states; ++s)
                for (int a = 0; a < sp.num_actions; ++a)
                    inflow += mu(h, s, a) * kernel(h, s, a, s2);
            double outflow = 0.0;
            for (int a = 0; a < sp.num_actions; ++a)
                outflow += mu(h + 1, s2, a);
            if (std::abs(inflow - outflow) > tol)
                out.push_back({h, s2, -1, inflow - outflow, "flow conservation violated"});
        }
    return out;
}

struct CoverageRatios {
    double ratio_sig = 0.0;   // max_pi sum over significant triples of mu^pi / mu_ref
    double mass_nonsig = 0.0; // max_pi visitation mass outside the significant set
};

/// Exact coverage diagnostics. Both maxima over policies are linear in the
/// occupancy measure, so each is attained by a deterministic policy and is
/// computed by dynamic programming instead of sampling: ratio_sig uses reward
/// 1/mu_ref on the significant set, mass_nonsig indicator rewards off it.
inline CoverageRatios coverage_ratios(const OccupancyMeasure& mu_ref, double omega,
                                      const TransitionKernel& kernel) {
    detail::require_same_spec(mu_ref.spec, kernel.spec, "coverage_ratios");
    const MdpSpec& sp = mu_ref.spec;
    const SignificanceSet psi = significance_set(mu_ref, omega);

    CoverageRatios out;
    if (psi.count() > 0) {
        RewardFunction inv(sp, 0.0, 1.0);
        double rmax = 0.0;
        for (std::size_t i = 0; i < inv.r.size(); ++i)
            if (psi.member[i]) {
                // membership requires mu_ref > omega > 0, so no zero division
                inv.r[i] = 1.0 / mu_ref.mu[i];
                rmax = std::max(rmax, inv.r[i]);
            }
        inv.b_max = std::max(1.0, rmax);
        out.ratio_sig = dp_optimal(kernel, inv).first.initial_value(kernel.mu1);
    }

    RewardFunction indicator(sp, 0.0, 1.0);
    bool any_nonsig = false;
    for (std::size_t i = 0; i < indicator.r.size(); ++i)
        if (!psi.member[i]) {
            indicator.r[i] = 1.0;
            any_nonsig = true;
        }
    out.mass_nonsig =
        any_nonsig ? dp_optimal(kernel, indicator).first.initial_value(kernel.mu1) : 0.0;
    return out;
}

/// Unnormalized KL Bregman divergence between augmented occupancies:
/// D(mu||nu) = sum mu ln(mu/nu) - sum mu + sum nu. Returns +inf when mu puts
/// mass where nu has none.
inline double kl_bregman(const AugmentedOccupancy& mu, const AugmentedOccupancy& nu) {
    detail::require_same_spec(mu.spec, nu.spec, "kl_bregman");
    double acc = 0.0;
    for (std::size_t i = 0; i < mu.mu.size(); ++i) {
        const double x = mu.mu[i];
        const double y = nu.mu[i];
        if (x > 0.0) {
            if (y <= 0.0)
                return std::numeric_limits<double>::infinity();
            acc += x * std::log(x / y) - x + y;
        } else {
            acc += y;
        }
    }
    return acc;
}

} // namespace rfx
