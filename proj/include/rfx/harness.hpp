#pragma once

#include "rfx/hard_instance.hpp"
#include "rfx/random_mdp.hpp"
#include "rfx/serialize.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

namespace rfx {

/// Exact suboptimality gap E_{s ~ mu1}[V*_1(s) - V^pi_1(s)] of a policy under
/// the true kernel.
inline double evaluate_suboptimality(const MarkovPolicy& policy, const TransitionKernel& kernel,
                                     const RewardFunction& reward) {
    const double optimal = dp_optimal(kernel, reward).first.initial_value(kernel.mu1);
    const double achieved =
        dp_policy_eval(kernel, reward, policy).initial_value(kernel.mu1);
    return optimal - achieved;
}

/// Uniform-policy data collection baseline; same outputs as estimate_dynamics.
inline EstimationResult baseline_uniform(const TransitionKernel& env,
                                         std::int64_t num_trajectories, RandomSeed seed,
                                         double ell0) {
    if (num_trajectories < 1)
        throw config_error("baseline_uniform: need at least one trajectory");
    MixturePolicy mix;
    mix.spec = env.spec;
    mix.components.push_back(MarkovPolicy::uniform(env.spec));
    return estimate_dynamics(env, mix, num_trajectories, seed, ell0);
}

struct MdpSource {
    enum class Kind { file, random, hard };
    Kind kind = Kind::random;
    std::string path;      // file source
    MdpSpec random_spec;   // random source
    RandomSeed mdp_seed = 1;
    HardInstanceParams hard;
};

struct ExperimentConfig {
    MdpSource source;
    double eps = 0.1;
    double delta = 0.1;
    ExplorationSetting setting = ExplorationSetting::reward_free;
    ConstantProfile profile = ConstantProfile::practical;
    PracticalMultipliers multipliers;
    double penalty_constant = 0.0;            // 0 = profile default
    std::vector<std::string> reward_class_files;
    int num_eval_rewards = 10;                // generated class/held-out size
    std::vector<RandomSeed> seeds = {1};
    std::vector<std::int64_t> n_grid;         // sweep N values
    std::vector<std::int64_t> t_grid;         // sweep T values (optional)
    std::int64_t episodes_override = 0;       // pipeline T; 0 = profile schedule
    std::int64_t trajectories_override = 0;   // pipeline N; 0 = budget formula
    std::int64_t episode_cap = 10000000;
    std::int64_t budget_cap = 100000000;
    bool timing = false;                      // wall_ms stays 0 unless enabled
    std::string out_dir;                      // fallback output directory

    double default_penalty_constant() const {
        if (penalty_constant > 0.0)
            return penalty_constant;
        if (profile == ConstantProfile::theory)
            return setting == ExplorationSetting::reward_agnostic ? 48.0 : 64.0;
        // shipped practical defaults
        return setting == ExplorationSetting::reward_agnostic ? 0.5 : 0.5;
    }
};

/// Per-seed pipeline record. Gap is the worst over the evaluated rewards.
struct RunRecord {
    RandomSeed seed = 0;
    std::int64_t num_trajectories = 0;
    std::int64_t num_episodes = 0;
    ConstantProfile profile = ConstantProfile::practical;
    ExplorationSetting setting = ExplorationSetting::reward_free;
    double gap = 0.0;
    std::vector<double> per_reward_gaps;
    double ratio_sig = 0.0;
    double mass_nonsig = 0.0;
    double learner_reward = 0.0;
    double cumulative_bound = 0.0;
    double penalty_mean = 0.0;
    double penalty_max = 0.0;
    double wall_ms = 0.0;
    std::string error;
};

inline TransitionKernel instantiate_mdp(const MdpSource& src) {
    switch (src.kind) {
    case MdpSource::Kind::file:
        return kernel_from_json(load_json_file(src.path));
    case MdpSource::Kind::random:
        return random_mdp(src.random_spec, src.mdp_seed);
    case MdpSource::Kind::hard:
        return build_hard_transitions(src.hard, src.mdp_seed);
    }
    throw config_error("instantiate_mdp: unknown source kind");
}

/// Rewards the pipeline plans against. They belong to the problem instance,
/// so they derive from the instance seed, not the per-run seed.
inline std::vector<RewardFunction> pipeline_rewards(const ExperimentConfig& cfg,
                                                    const TransitionKernel& env) {
    std::vector<RewardFunction> rewards;
    if (!cfg.reward_class_files.empty()) {
        for (const std::string& path : cfg.reward_class_files) {
            rewards.push_back(reward_from_json(load_json_file(path)));
            detail::require_same_spec(rewards.back().spec, env.spec, "reward class file");
        }
        return rewards;
    }
    if (cfg.source.kind == MdpSource::Kind::hard) {
        rewards.push_back(build_hard_reward(cfg.source.hard));
        return rewards;
    }
    if (cfg.num_eval_rewards < 1)
        throw config_error("pipeline: need at least one evaluation reward");
    for (int i = 0; i < cfg.num_eval_rewards; ++i)
        rewards.push_back(random_reward(env.spec, Rng::derive(cfg.source.mdp_seed, 7000 + i)));
    return rewards;
}

/// Executes the meta-pipeline: create the exploration policy, estimate the
/// dynamics from it, then plan pessimistically and evaluate exactly for every
/// revealed reward. Only the final evaluation touches the true kernel.
namespace detail {

// rethrows the active exception with a stage prefix, keeping its type
[[noreturn]] inline void rethrow_tagged(const char* stage) {
    try {
        throw;
    } catch (const cap_exceeded_error& e) {
        throw cap_exceeded_error(std::string(stage) + ": " + e.what());
    } catch (const convergence_error& e) {
        throw convergence_error(std::string(stage) + ": " + e.what(), e.best_iterate,
                                e.constraint_residual, e.successive_kl);
    } catch (const std::exception& e) {
        throw config_error(std::string(stage) + ": " + e.what());
    }
}

} // namespace detail

inline RunRecord run_pipeline(const ExperimentConfig& cfg, RandomSeed seed) {
    const auto t0 = std::chrono::steady_clock::now();
    const TransitionKernel env = instantiate_mdp(cfg.source);
    const MdpSpec& sp = env.spec;

    ExplorationConfig xcfg = exploration_constants(sp, cfg.eps, cfg.delta, cfg.profile,
                                                   cfg.multipliers, cfg.episode_cap);
    if (cfg.episodes_override > 0)
        xcfg.num_episodes = cfg.episodes_override;
    if (xcfg.num_episodes > cfg.episode_cap)
        throw cap_exceeded_error("pipeline: exploration episodes exceed the cap");

    ExplorationResult exploration;
    try {
        exploration = create_exploration_policy(env, xcfg, Rng::derive(seed, 0xe1));
    } catch (...) {
        detail::rethrow_tagged("explore");
    }

    const std::vector<RewardFunction> rewards = pipeline_rewards(cfg, env);
    const double ell0_extra = cfg.setting == ExplorationSetting::reward_agnostic
                                  ? std::log(static_cast<double>(rewards.size()))
                                  : 0.0;
    std::int64_t n = cfg.trajectories_override;
    if (n <= 0)
        n = sample_budget(cfg.setting, sp, cfg.eps, cfg.delta, cfg.profile, 1.0,
                          cfg.budget_cap, ell0_extra)
                .trajectories;
    if (n > cfg.budget_cap)
        throw cap_exceeded_error("pipeline: trajectory budget exceeds the cap");

    EstimationResult est;
    try {
        est = estimate_dynamics(env, exploration.mixture, n, Rng::derive(seed, 0xe2),
                                xcfg.ell0);
    } catch (...) {
        detail::rethrow_tagged("estimate");
    }

    PenaltyKind kind;
    kind.setting = cfg.setting;
    kind.constant = cfg.default_penalty_constant();
    kind.class_size = cfg.setting == ExplorationSetting::reward_agnostic
                          ? static_cast<std::int64_t>(rewards.size())
                          : 1;

    RunRecord rec;
    rec.seed = seed;
    rec.num_trajectories = n;
    rec.num_episodes = xcfg.num_episodes;
    rec.profile = cfg.profile;
    rec.setting = cfg.setting;
    rec.learner_reward = exploration.diagnostics.learner_reward;
    rec.cumulative_bound = exploration.diagnostics.cumulative_bound;

    double penalty_sum = 0.0;
    std::size_t penalty_n = 0;
    for (const RewardFunction& reward : rewards) {
        PessimisticPlan plan;
        try {
            plan = pessimistic_plan(reward, est.model, est.counts, kind);
        } catch (...) {
            detail::rethrow_tagged("plan");
        }
        rec.per_reward_gaps.push_back(evaluate_suboptimality(plan.policy, env, reward));
        rec.gap = std::max(rec.gap, rec.per_reward_gaps.back());
        for (double b : plan.penalty) {
            penalty_sum += b;
            rec.penalty_max = std::max(rec.penalty_max, b);
        }
        penalty_n += plan.penalty.size();
    }
    rec.penalty_mean = penalty_n ? penalty_sum / penalty_n : 0.0;

    const OccupancyMeasure mixture_mu = mixture_occupancy(exploration.mixture, env);
    const CoverageRatios cov = coverage_ratios(mixture_mu, xcfg.omega, env);
    rec.ratio_sig = cov.ratio_sig;
    rec.mass_nonsig = cov.mass_nonsig;

    if (cfg.timing) {
        const auto t1 = std::chrono::steady_clock::now();
        rec.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    }
    return rec;
}

/// Self-normalized-sum checks run as property batches over random positive
/// sequences; violations carry the witness sequence.
struct LemmaCheckReport {
    int sequences_per_form = 0;
    int violations_form_one = 0; // sum a_i / (1 + sum_{j<i} a_j) <= 2 ln(1 + sum a_i)
    int violations_form_two = 0; // sum a_i / S_i <= 1 + ln(S_n / S_1)
    std::vector<std::vector<double>> witnesses;
};

inline LemmaCheckReport lemma_checks(int sequences = 1000, RandomSeed seed = 20260808) {
    LemmaCheckReport report;
    report.sequences_per_form = sequences;
    Rng rng(seed);
    for (int k = 0; k < sequences; ++k) {
        const int n = 1 + rng.uniform_int(50);
        std::vector<double> a(n);
        for (double& v : a)
            v = rng.uniform_pos(); // (0, 1]

        double prefix = 0.0, lhs1 = 0.0, total = 0.0;
        for (int i = 0; i < n; ++i) {
            lhs1 += a[i] / (1.0 + prefix);
            prefix += a[i];
            total += a[i];
        }
        if (lhs1 > 2.0 * std::log1p(total) + 1e-12) {
            ++report.violations_form_one;
            report.witnesses.push_back(a);
        }

        // the second form holds for any positive sequence; spread magnitudes
        std::vector<double> b(n);
        for (int i = 0; i < n; ++i)
            b[i] = a[i] * std::exp(4.0 * (rng.uniform() - 0.5));
        double run = 0.0, lhs2 = 0.0, first = b[0];
        for (int i = 0; i < n; ++i) {
            run += b[i];
            lhs2 += b[i] / run;
        }
        if (lhs2 > 1.0 + std::log(run / first) + 1e-12) {
            ++report.violations_form_two;
            report.witnesses.push_back(b);
        }
    }
    return report;
}

namespace detail {

inline double median(std::vector<double> xs) {
    if (xs.empty())
        return std::nan("");
    std::sort(xs.begin(), xs.end());
    const std::size_t m = xs.size() / 2;
    return xs.size() % 2 ? xs[m] : 0.5 * (xs[m - 1] + xs[m]);
}

inline std::string csv_num(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.10g", x);
    return buf;
}

} // namespace detail

inline const char* kSweepCsvHeader =
    "seed,N,T,profile,setting,gap,ratio_sig,mass_nonsig,learner_reward,G_bound,wall_ms,error";

/// Grid sweep over N (and optionally T): one row per (cell, seed), one median
/// row per cell. Deterministic given (config, seeds); timing is off by
/// default so reruns are byte-identical.
inline std::string sweep(const ExperimentConfig& cfg) {
    if (cfg.seeds.empty())
        throw config_error("sweep: need at least one seed");
    if (!(cfg.delta > 0.0 && cfg.delta < 1.0) || !(cfg.eps > 0.0))
        throw config_error("sweep: need eps > 0 and delta in (0,1)");
    std::vector<std::int64_t> n_values = cfg.n_grid;
    if (n_values.empty())
        n_values.push_back(cfg.trajectories_override > 0 ? cfg.trajectories_override : 1000);
    std::vector<std::int64_t> t_values = cfg.t_grid;
    if (t_values.empty())
        t_values.push_back(cfg.episodes_override);

    std::string csv = std::string(kSweepCsvHeader) + "\n";
    for (std::int64_t t : t_values) {
        for (std::int64_t n : n_values) {
            ExperimentConfig cell = cfg;
            cell.trajectories_override = n;
            cell.episodes_override = t;
            std::vector<RunRecord> records;
            for (RandomSeed seed : cfg.seeds) {
                RunRecord rec;
                try {
                    rec = run_pipeline(cell, seed);
                } catch (const std::exception& e) {
                    rec = RunRecord{};
                    rec.seed = seed;
                    rec.num_trajectories = n;
                    rec.num_episodes = t;
                    rec.profile = cfg.profile;
                    rec.setting = cfg.setting;
                    rec.error = e.what();
                }
                records.push_back(std::move(rec));
            }
            std::vector<double> gaps, ratios, masses, learners;
            for (const RunRecord& rec : records) {
                csv += std::to_string(rec.seed) + "," + std::to_string(rec.num_trajectories) +
                       "," + std::to_string(rec.num_episodes) + "," +
                       profile_name(rec.profile) + "," + setting_name(rec.setting) + ",";
                if (rec.error.empty()) {
                    csv += detail::csv_num(rec.gap) + "," + detail::csv_num(rec.ratio_sig) +
                           "," + detail::csv_num(rec.mass_nonsig) + "," +
                           detail::csv_num(rec.learner_reward) + "," +
                           detail::csv_num(rec.cumulative_bound) + "," +
                           detail::csv_num(rec.wall_ms) + ",";
                    gaps.push_back(rec.gap);
                    ratios.push_back(rec.ratio_sig);
                    masses.push_back(rec.mass_nonsig);
                    learners.push_back(rec.learner_reward);
                } else {
                    std::string msg = rec.error;
                    for (char& ch : msg)
                        if (ch == ',' || ch == '\n')
                            ch = ';';
                    csv += ",,,,,," + msg;
                }
                csv += "\n";
            }
            csv += std::string("median,") + std::to_string(n) + "," + std::to_string(t) + "," +
                   profile_name(cfg.profile) + "," + setting_name(cfg.setting) + "," +
                   detail::csv_num(detail::median(gaps)) + "," +
                   detail::csv_num(detail::median(ratios)) + "," +
                   detail::csv_num(detail::median(masses)) + "," +
                   detail::csv_num(detail::median(learners)) + ",,0,\n";
        }
    }
    return csv;
}

} // namespace rfx
