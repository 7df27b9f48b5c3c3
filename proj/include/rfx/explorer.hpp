#pragma once

#include "rfx/omd.hpp"

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace rfx {

enum class ConstantProfile { theory, practical };

inline const char* profile_name(ConstantProfile p) {
    return p == ConstantProfile::theory ? "theory" : "practical";
}

/// Constant schedule for exploration-policy creation. The theory profile uses
/// the schedule verbatim (c = 4|S|H^2 ell0, omega = eps/(885 |S||A|H^2 ell0^2),
/// T = ceil(2c/omega), B = 1/c); the practical profile applies configurable
/// multipliers so desk-scale runs finish, and records which profile produced
/// the numbers.
struct ExplorationConfig {
    ConstantProfile profile = ConstantProfile::practical;
    double ell0 = 0.0;
    double c = 0.0;
    double omega = 0.0;
    double reward_bound = 0.0; // B = 1/c
    std::int64_t num_episodes = 0;

    /// G(T) = 4 |S||A| H ln T, the learner cumulative reward bound.
    double cumulative_bound(const MdpSpec& spec) const {
        return 4.0 * spec.num_states * spec.num_actions * spec.horizon *
               std::log(static_cast<double>(num_episodes));
    }
};

struct PracticalMultipliers {
    // defaults shrink c by 1/ell0, grow omega by ell0^2 and shrink T by
    // 1/(|S| H^2 ell0) relative to the theory schedule
    double c_mult = 0.0;     // 0 means "use default 1/ell0"
    double omega_mult = 0.0; // 0 means "use default ell0^2"
    double t_mult = 0.0;     // 0 means "use default 1/(|S| H^2 ell0)"
};

inline ExplorationConfig exploration_constants(const MdpSpec& spec, double eps, double delta,
                                               ConstantProfile profile,
                                               const PracticalMultipliers& mult = {},
                                               std::int64_t episode_cap = 10000000) {
    if (!(eps > 0.0) || !(delta > 0.0 && delta < 1.0))
        throw config_error("exploration_constants: need eps > 0 and delta in (0,1)");
    spec.validate();
    ExplorationConfig cfg;
    cfg.profile = profile;
    cfg.ell0 = log_factor(spec, delta, eps);
    const double S = spec.num_states, A = spec.num_actions, H = spec.horizon;

    double c_mult = 1.0, omega_mult = 1.0, t_mult = 1.0;
    if (profile == ConstantProfile::practical) {
        c_mult = mult.c_mult > 0.0 ? mult.c_mult : 1.0 / cfg.ell0;
        omega_mult = mult.omega_mult > 0.0 ? mult.omega_mult : cfg.ell0 * cfg.ell0;
        t_mult = mult.t_mult > 0.0 ? mult.t_mult : 1.0 / (S * H * H * cfg.ell0);
    }

    cfg.c = c_mult * 4.0 * S * H * H * cfg.ell0;
    cfg.omega = omega_mult * eps / (885.0 * S * A * H * H * cfg.ell0 * cfg.ell0);
    cfg.reward_bound = 1.0 / cfg.c;
    const double t_real = t_mult * 2.0 * cfg.c / cfg.omega;
    if (profile == ConstantProfile::theory && t_real > static_cast<double>(episode_cap))
        throw cap_exceeded_error(
            "exploration_constants: theory-profile T exceeds the episode cap (" +
            std::to_string(t_real) + " > " + std::to_string(episode_cap) +
            "); use the practical profile");
    if (t_real > 9e18)
        throw cap_exceeded_error("exploration_constants: T does not fit a 64-bit count");
    cfg.num_episodes = static_cast<std::int64_t>(std::ceil(t_real));
    return cfg;
}

/// Count-inverse exploration rewards lambda_h(s,a) = 1 / (c + n_h(s,a)).
inline RewardFunction lambda_rewards(const VisitCounts& counts, double c) {
    if (!(c > 0.0))
        throw config_error("lambda_rewards: c must be positive");
    RewardFunction out(counts.spec, 0.0, 1.0 / c);
    for (std::size_t i = 0; i < out.r.size(); ++i)
        out.r[i] = 1.0 / (c + static_cast<double>(counts.n_sa[i]));
    return out;
}

/// Uniform mixture over the per-episode policies of the online run. Kept as an
/// explicit list: the mixture's occupancy is the average of the component
/// occupancies, which is the object the coverage guarantee speaks about.
struct MixturePolicy {
    MdpSpec spec;
    std::vector<MarkovPolicy> components;

    int size() const { return static_cast<int>(components.size()); }
    double weight() const { return 1.0 / components.size(); }
};

/// Exact mixture occupancy (1/T) sum_t mu^{pi_t, P}.
inline OccupancyMeasure mixture_occupancy(const MixturePolicy& mix,
                                          const TransitionKernel& kernel) {
    if (mix.components.empty())
        throw config_error("mixture_occupancy: empty mixture");
    detail::require_same_spec(mix.spec, kernel.spec, "mixture_occupancy");
    OccupancyMeasure out(mix.spec);
    const double w = mix.weight();
    for (const MarkovPolicy& pi : mix.components) {
        const OccupancyMeasure m = occupancy_from_policy(kernel, pi);
        for (std::size_t i = 0; i < out.mu.size(); ++i)
            out.mu[i] += w * m.mu[i];
    }
    return out;
}

/// Collapses the mixture into an equivalent Markov policy via its exact
/// occupancy. Requires the true kernel, so this is an analysis aid only.
inline MarkovPolicy mixture_as_markov(const MixturePolicy& mix, const TransitionKernel& kernel) {
    return policy_from_occupancy(mixture_occupancy(mix, kernel));
}

struct ExplorationDiagnostics {
    double learner_reward = 0.0;   // realized sum_t <lambda^t, mu^{pi_t}>
    double cumulative_bound = 0.0; // G(T)
    double eta = 0.0;
};

struct ExplorationResult {
    MixturePolicy mixture;
    VisitCounts counts;
    ExplorationDiagnostics diagnostics;
    std::vector<RewardFunction> lambda_history;
    std::vector<OccupancyMeasure> occupancy_history; // true occupancies of pi_t
};

/// Runs the online learner on the count-inverse reward stream and returns the
/// uniform mixture of the visited policies. The reward for episode t is built
/// from counts that exclude episode t's own trajectory.
inline ExplorationResult create_exploration_policy(const TransitionKernel& env,
                                                   const ExplorationConfig& cfg, RandomSeed seed,
                                                   const ProjectionSettings& settings = {}) {
    if (cfg.num_episodes < 1)
        throw config_error("create_exploration_policy: T must be at least 1");
    const MdpSpec& sp = env.spec;
    ExplorationResult out;
    out.mixture.spec = sp;

    std::vector<RewardFunction>& lambdas = out.lambda_history;
    RewardStream stream = [&](int /*t*/, const VisitCounts& counts) {
        lambdas.push_back(lambda_rewards(counts, cfg.c));
        return lambdas.back();
    };

    const double g_bound = cfg.cumulative_bound(sp);
    UcorepsResult run = ucoreps_run(env, stream, static_cast<int>(cfg.num_episodes),
                                    cfg.reward_bound, g_bound, cfg.ell0, seed, settings);

    out.mixture.components = std::move(run.policies);
    out.counts = std::move(run.counts);
    out.diagnostics.cumulative_bound = g_bound;
    out.diagnostics.eta = run.eta;
    out.occupancy_history.reserve(out.mixture.components.size());
    for (std::size_t t = 0; t < out.mixture.components.size(); ++t) {
        out.occupancy_history.push_back(
            occupancy_from_policy(env, out.mixture.components[t]));
        out.diagnostics.learner_reward +=
            expected_return(out.occupancy_history.back(), out.lambda_history[t]);
    }
    return out;
}

} // namespace rfx
