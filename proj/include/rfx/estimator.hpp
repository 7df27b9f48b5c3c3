#pragma once

#include "rfx/explorer.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <vector>

namespace rfx {

/// Trajectories collected from the exploration mixture, with the seed and a
/// hash identifying the generating policy.
struct Dataset {
    MdpSpec spec;
    RandomSeed seed = 0;
    std::uint64_t policy_hash = 0;
    std::vector<Trajectory> trajectories;

    std::int64_t size() const { return static_cast<std::int64_t>(trajectories.size()); }
};

/// FNV-1a over the bit patterns of the mixture's action tables.
inline std::uint64_t hash_mixture(const MixturePolicy& mix) {
    std::uint64_t h = 1469598103934665603ull;
    auto eat = [&h](std::uint64_t v) {
        for (int b = 0; b < 8; ++b) {
            h ^= (v >> (8 * b)) & 0xff;
            h *= 1099511628211ull;
        }
    };
    eat(static_cast<std::uint64_t>(mix.components.size()));
    for (const MarkovPolicy& pi : mix.components)
        for (double x : pi.pi) {
            std::uint64_t bits;
            static_assert(sizeof(bits) == sizeof(x));
            std::memcpy(&bits, &x, sizeof(bits));
            eat(bits);
        }
    return h;
}

struct EstimationResult {
    Dataset dataset;
    EmpiricalModel model;
    VisitCounts counts;
};

/// Samples N episodes from the mixture: each episode draws a fresh component
/// uniformly, then rolls it out. Episode randomness comes from per-episode
/// derived substreams, so the result is independent of evaluation order and a
/// dataset of size N is a prefix of any larger one under the same seed.
inline EstimationResult estimate_dynamics(const TransitionKernel& env,
                                          const MixturePolicy& mixture,
                                          std::int64_t num_trajectories, RandomSeed seed,
                                          double ell0) {
    if (num_trajectories < 1)
        throw config_error("estimate_dynamics: need at least one trajectory");
    if (mixture.components.empty())
        throw config_error("estimate_dynamics: empty mixture");
    detail::require_same_spec(env.spec, mixture.spec, "estimate_dynamics");

    EstimationResult out;
    out.dataset.spec = env.spec;
    out.dataset.seed = seed;
    out.dataset.policy_hash = hash_mixture(mixture);
    out.dataset.trajectories.reserve(num_trajectories);
    out.counts = VisitCounts(env.spec);
    for (std::int64_t n = 0; n < num_trajectories; ++n) {
        const RandomSeed sub = Rng::derive(seed, static_cast<std::uint64_t>(n));
        Rng pick(Rng::derive(sub, 0x7f4a));
        const int component = pick.uniform_int(mixture.size());
        out.dataset.trajectories.push_back(
            sample_trajectory(env, mixture.components[component], Rng::derive(sub, 0x51b)));
        update_counts(out.counts, out.dataset.trajectories.back());
    }
    out.model = empirical_model(out.counts, ell0);
    return out;
}

enum class ExplorationSetting { reward_agnostic, reward_free };

inline const char* setting_name(ExplorationSetting s) {
    return s == ExplorationSetting::reward_agnostic ? "rae" : "rfe";
}

struct SampleBudget {
    double coefficient = 0.0; // everything except ell0^3/eps^2, exact in doubles
    double real_value = 0.0;
    std::int64_t trajectories = 0;
};

/// Episode budgets of the two settings. Theory profile evaluates the closed
/// forms verbatim:
///   RAE: ceil(81 * 9440 * c_a * |S||A| H^3 ell0^3 / eps^2),  c_a = 48
///   RFE: ceil(81 * 28320 * c_f * |S|^2|A| H^3 ell0^3 / eps^2), c_f = 64.
/// The practical profile keeps the scaling laws but replaces ell0^3 by ell0
/// and applies a configurable leading constant.
inline SampleBudget sample_budget(ExplorationSetting setting, const MdpSpec& spec, double eps,
                                  double delta, ConstantProfile profile,
                                  double practical_lead = 1.0,
                                  std::int64_t budget_cap = (1ll << 62),
                                  double ell0_extra = 0.0) {
    if (!(eps > 0.0) || !(delta > 0.0 && delta < 1.0))
        throw config_error("sample_budget: need eps > 0 and delta in (0,1)");
    spec.validate();
    const double ell0 = log_factor(spec, delta, eps, ell0_extra);
    const double S = spec.num_states, A = spec.num_actions, H = spec.horizon;

    SampleBudget out;
    if (profile == ConstantProfile::theory) {
        out.coefficient = setting == ExplorationSetting::reward_agnostic
                              ? 81.0 * 9440.0 * 48.0 * S * A * H * H * H
                              : 81.0 * 28320.0 * 64.0 * S * S * A * H * H * H;
        out.real_value = out.coefficient * ell0 * ell0 * ell0 / (eps * eps);
    } else {
        out.coefficient = practical_lead * (setting == ExplorationSetting::reward_agnostic
                                                ? S * A * H * H * H
                                                : S * S * A * H * H * H);
        out.real_value = out.coefficient * ell0 / (eps * eps);
    }
    if (!(out.real_value < static_cast<double>(budget_cap)))
        throw cap_exceeded_error("sample_budget: required trajectories " +
                                 std::to_string(out.real_value) + " exceed the cap");
    out.trajectories = static_cast<std::int64_t>(std::ceil(out.real_value));
    return out;
}

} // namespace rfx
