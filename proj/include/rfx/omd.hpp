#pragma once

#include "rfx/confidence.hpp"
#include "rfx/occupancy.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

namespace rfx {

// Interior floor keeping entropic iterates strictly positive so the Bregman
// divergence stays finite.
inline constexpr double kOccupancyFloor = 1e-300;

/// Elementwise transition band [max{P_hat - eps, 0}, min{P_hat + eps, 1}]
/// around one empirical-model snapshot, plus the structural normalization and
/// flow constraints of the augmented occupancy polytope. Unvisited rows carry
/// the vacuous band [0, 1].
struct ConstraintPolytope {
    MdpSpec spec;
    std::vector<double> lower; // [h][s][a][s']
    std::vector<double> upper; // [h][s][a][s']
};

inline ConstraintPolytope build_polytope(const EmpiricalModel& model) {
    ConstraintPolytope k;
    k.spec = model.spec;
    k.lower.resize(model.p_hat.size());
    k.upper.resize(model.p_hat.size());
    for (std::size_t i = 0; i < model.p_hat.size(); ++i) {
        k.lower[i] = std::max(model.p_hat[i] - model.radius[i], 0.0);
        k.upper[i] = std::min(model.p_hat[i] + model.radius[i], 1.0);
    }
    return k;
}

/// Exact-kernel polytope: band degenerate at P (used for known-dynamics runs).
inline ConstraintPolytope exact_polytope(const TransitionKernel& kernel) {
    ConstraintPolytope k;
    k.spec = kernel.spec;
    k.lower = kernel.p;
    k.upper = kernel.p;
    return k;
}

struct ProjectionSettings {
    double feasibility_tol = 1e-8; // L-inf residual over all constraints
    double sweep_kl_tol = 1e-12;   // KL between successive sweeps
    int max_sweeps = 100000;
};

namespace detail {

// L-inf residual of x over normalization, flow and band constraints.
inline double polytope_residual(const std::vector<double>& x, const ConstraintPolytope& k) {
    const MdpSpec& sp = k.spec;
    const int S = sp.num_states, A = sp.num_actions, H = sp.horizon;
    const std::size_t slice = static_cast<std::size_t>(S) * A * S;
    double res = 0.0;
    for (int h = 0; h < H; ++h) {
        const double* xs = x.data() + h * slice;
        double sum = 0.0;
        for (std::size_t i = 0; i < slice; ++i)
            sum += xs[i];
        res = std::max(res, std::abs(sum - 1.0));
    }
    for (int h = 0; h + 1 < H; ++h) {
        for (int s2 = 0; s2 < S; ++s2) {
            double in = 0.0;
            for (int s = 0; s < S; ++s)
                for (int a = 0; a < A; ++a)
                    in += x[sp.hsas(h, s, a, s2)];
            double out = 0.0;
            const double* xrow = x.data() + sp.hsas(h + 1, s2, 0, 0);
            for (int i = 0; i < A * S; ++i)
                out += xrow[i];
            res = std::max(res, std::abs(in - out));
        }
    }
    for (int h = 0; h < H; ++h)
        for (int s = 0; s < S; ++s)
            for (int a = 0; a < A; ++a) {
                const std::size_t base = sp.hsas(h, s, a, 0);
                double rowsum = 0.0;
                for (int s2 = 0; s2 < S; ++s2)
                    rowsum += x[base + s2];
                for (int s2 = 0; s2 < S; ++s2) {
                    res = std::max(res, x[base + s2] - k.upper[base + s2] * rowsum);
                    res = std::max(res, k.lower[base + s2] * rowsum - x[base + s2]);
                }
            }
    return res;
}

} // namespace detail

/// Constrained entropic mirror-descent step: returns
///   argmax_{mu in K} eta <mu, r> - D(mu || mu_prev),
/// where the reward r over (h,s,a) is broadcast over next states.
///
/// The unconstrained maximizer is mu_prev * exp(eta r); the constrained one is
/// its KL projection onto K. The projection runs Dykstra-style alternating
/// Bregman projections over constraint blocks in a fixed order: per-step
/// normalization, flow interfaces by ascending h, band constraints by
/// ascending index. Normalization and flow are affine, so their projections
/// carry no correction term; each band inequality keeps a scalar correction.
/// All block projections are closed-form.
inline AugmentedOccupancy entropic_projection(const AugmentedOccupancy& mu_prev,
                                              const RewardFunction& reward, double eta,
                                              const ConstraintPolytope& polytope,
                                              const ProjectionSettings& settings = {},
                                              double* out_residual = nullptr) {
    detail::require_same_spec(mu_prev.spec, polytope.spec, "entropic_projection");
    detail::require_same_spec(mu_prev.spec, reward.spec, "entropic_projection");
    if (eta < 0.0)
        throw config_error("entropic_projection: eta must be nonnegative");
    const MdpSpec& sp = mu_prev.spec;
    const int S = sp.num_states, A = sp.num_actions, H = sp.horizon;
    const std::size_t slice = static_cast<std::size_t>(S) * A * S;

    // band feasibility sanity: sum of lower bounds <= 1 <= sum of upper bounds
    for (std::size_t row = 0; row < sp.size_hsa(); ++row) {
        double lo = 0.0, hi = 0.0;
        for (int s2 = 0; s2 < S; ++s2) {
            lo += polytope.lower[row * S + s2];
            hi += polytope.upper[row * S + s2];
        }
        if (lo > 1.0 + 1e-9 || hi < 1.0 - 1e-9)
            throw config_error("entropic_projection: infeasible transition band");
    }

    AugmentedOccupancy result(sp);
    std::vector<double>& x = result.mu;
    x = mu_prev.mu;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (eta > 0.0) {
            double e = eta * reward.r[i / S];
            e = std::min(std::max(e, -700.0), 700.0);
            x[i] *= std::exp(e);
        }
        if (x[i] < kOccupancyFloor)
            x[i] = kOccupancyFloor;
    }

    // the initial point is the unconstrained optimum; feasible means done
    double residual = detail::polytope_residual(x, polytope);
    if (out_residual)
        *out_residual = residual;
    if (residual < settings.feasibility_tol)
        return result;

    std::vector<double> corr_up(sp.size_hsas(), 0.0);
    std::vector<double> corr_lo(sp.size_hsas(), 0.0);
    std::vector<double> prev(x.size());
    std::vector<double> inflow(S), outflow(S);

    double sweep_kl = std::numeric_limits<double>::infinity();
    int sweep = 0;
    for (; sweep < settings.max_sweeps; ++sweep) {
        prev = x;

        // normalization per step h
        for (int h = 0; h < H; ++h) {
            double* xs = x.data() + h * slice;
            double sum = 0.0;
            for (std::size_t i = 0; i < slice; ++i)
                sum += xs[i];
            const double inv = 1.0 / sum;
            for (std::size_t i = 0; i < slice; ++i)
                xs[i] = std::max(xs[i] * inv, kOccupancyFloor);
        }

        // flow conservation per interface h -> h+1; in- and out-supports are
        // disjoint across states, so one joint closed form handles the layer:
        // both sides are scaled to the geometric mean of their masses.
        for (int h = 0; h + 1 < H; ++h) {
            std::fill(inflow.begin(), inflow.end(), 0.0);
            std::fill(outflow.begin(), outflow.end(), 0.0);
            for (int s = 0; s < S; ++s)
                for (int a = 0; a < A; ++a) {
                    const std::size_t base = sp.hsas(h, s, a, 0);
                    for (int s2 = 0; s2 < S; ++s2)
                        inflow[s2] += x[base + s2];
                }
            for (int s2 = 0; s2 < S; ++s2) {
                const double* xrow = x.data() + sp.hsas(h + 1, s2, 0, 0);
                for (int i = 0; i < A * S; ++i)
                    outflow[s2] += xrow[i];
            }
            for (int s2 = 0; s2 < S; ++s2) {
                const double fi = std::sqrt(outflow[s2] / inflow[s2]);
                const double fo = 1.0 / fi;
                for (int s = 0; s < S; ++s)
                    for (int a = 0; a < A; ++a) {
                        double& e = x[sp.hsas(h, s, a, s2)];
                        e = std::max(e * fi, kOccupancyFloor);
                    }
                double* xrow = x.data() + sp.hsas(h + 1, s2, 0, 0);
                for (int i = 0; i < A * S; ++i)
                    xrow[i] = std::max(xrow[i] * fo, kOccupancyFloor);
            }
        }

        // band inequalities with Dykstra corrections, ascending index
        for (std::size_t row = 0; row < sp.size_hsa(); ++row) {
            double* xr = x.data() + row * S;
            double rowsum = 0.0;
            for (int s2 = 0; s2 < S; ++s2)
                rowsum += xr[s2];
            for (int s2 = 0; s2 < S; ++s2) {
                const std::size_t j = row * S + s2;

                const double ub = polytope.upper[j];
                if (ub < 1.0) {
                    // restore the stored correction: ln z = ln x + th*(ub*1 - e_j)
                    const double th = corr_up[j];
                    if (th != 0.0) {
                        const double g = std::exp(th * ub);
                        const double gj = std::exp(-th);
                        rowsum = 0.0;
                        for (int i = 0; i < S; ++i) {
                            xr[i] = std::max(xr[i] * (i == s2 ? g * gj : g), kOccupancyFloor);
                            rowsum += xr[i];
                        }
                    }
                    if (xr[s2] > ub * rowsum) {
                        const double rest = rowsum - xr[s2];
                        const double log_beta = std::log(xr[s2]) + std::log1p(-ub) -
                                                std::log(ub) - std::log(rest);
                        const double g = std::exp(ub * log_beta);
                        const double gj = std::exp((ub - 1.0) * log_beta);
                        rowsum = 0.0;
                        for (int i = 0; i < S; ++i) {
                            xr[i] = std::max(xr[i] * (i == s2 ? gj : g), kOccupancyFloor);
                            rowsum += xr[i];
                        }
                        corr_up[j] = -log_beta;
                    } else {
                        corr_up[j] = 0.0;
                    }
                }

                const double lb = polytope.lower[j];
                if (lb > 0.0) {
                    const double th = corr_lo[j];
                    if (th != 0.0) {
                        // ln z = ln x + th*(e_j - lb*1)
                        const double g = std::exp(-th * lb);
                        const double gj = std::exp(th * (1.0 - lb));
                        rowsum = 0.0;
                        for (int i = 0; i < S; ++i) {
                            xr[i] = std::max(xr[i] * (i == s2 ? gj : g), kOccupancyFloor);
                            rowsum += xr[i];
                        }
                    }
                    if (xr[s2] < lb * rowsum) {
                        if (lb >= 1.0 - 1e-12) {
                            // degenerate bound: all other entries collapse
                            for (int i = 0; i < S; ++i)
                                if (i != s2)
                                    xr[i] = kOccupancyFloor;
                            corr_lo[j] = 0.0;
                        } else {
                            const double rest = rowsum - xr[s2];
                            const double log_m = std::log(lb) + std::log(rest) -
                                                 std::log(xr[s2]) - std::log1p(-lb);
                            const double g = std::exp(-lb * log_m);
                            const double gj = std::exp((1.0 - lb) * log_m);
                            for (int i = 0; i < S; ++i)
                                xr[i] = std::max(xr[i] * (i == s2 ? gj : g), kOccupancyFloor);
                            corr_lo[j] = -log_m;
                        }
                        rowsum = 0.0;
                        for (int i = 0; i < S; ++i)
                            rowsum += xr[i];
                    } else {
                        corr_lo[j] = 0.0;
                    }
                }
            }
        }

        sweep_kl = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i)
            sweep_kl += x[i] * std::log(x[i] / prev[i]) - x[i] + prev[i];
        residual = detail::polytope_residual(x, polytope);
        if (residual < settings.feasibility_tol && sweep_kl < settings.sweep_kl_tol)
            break;
    }

    if (out_residual)
        *out_residual = residual;
    if (sweep >= settings.max_sweeps)
        throw convergence_error("entropic_projection: no convergence after max sweeps", x,
                                residual, sweep_kl);
    return result;
}

/// Objective of the mirror-descent step at mu: eta <mu, r> - D(mu || mu_prev).
inline double projection_objective(const AugmentedOccupancy& mu, const RewardFunction& reward,
                                   double eta, const AugmentedOccupancy& mu_prev) {
    const int S = mu.spec.num_states;
    double lin = 0.0;
    for (std::size_t i = 0; i < mu.mu.size(); ++i)
        lin += mu.mu[i] * reward.r[i / S];
    return eta * lin - kl_bregman(mu, mu_prev);
}

/// Step size eta = sqrt(4 H ln(|S||A|) / (B * G)); |S||A| = 1 is rejected
/// because ln 1 = 0 degenerates the step.
inline double omd_step_size(double reward_bound, double cumulative_bound, const MdpSpec& spec) {
    if (!(reward_bound > 0.0) || !(cumulative_bound > 0.0))
        throw config_error("omd_step_size: bounds must be positive");
    const double sa = static_cast<double>(spec.num_states) * spec.num_actions;
    if (sa <= 1.0)
        throw config_error("omd_step_size: |S||A| must exceed 1");
    return std::sqrt(4.0 * spec.horizon * std::log(sa) / (reward_bound * cumulative_bound));
}

/// Policy induced by an augmented occupancy:
/// pi_h(a|s) = sum_{s'} mu / sum_{a',s'} mu; zero-mass rows become uniform.
inline MarkovPolicy induced_policy(const AugmentedOccupancy& mu) {
    return policy_from_occupancy(mu.marginal());
}

/// Kernel induced by an augmented occupancy:
/// P_h(s'|s,a) = mu_h(s,a,s') / sum_{s''} mu_h(s,a,s''); zero rows uniform.
/// The initial distribution is the first-layer state marginal.
inline TransitionKernel induced_kernel(const AugmentedOccupancy& mu) {
    const MdpSpec& sp = mu.spec;
    TransitionKernel k(sp);
    for (std::size_t row = 0; row < sp.size_hsa(); ++row) {
        double mass = 0.0;
        for (int s2 = 0; s2 < sp.num_states; ++s2)
            mass += mu.mu[row * sp.num_states + s2];
        for (int s2 = 0; s2 < sp.num_states; ++s2)
            k.p[row * sp.num_states + s2] =
                mass < 1e-15 ? 1.0 / sp.num_states : mu.mu[row * sp.num_states + s2] / mass;
    }
    double total = 0.0;
    for (int s = 0; s < sp.num_states; ++s) {
        double m = 0.0;
        for (int a = 0; a < sp.num_actions; ++a)
            for (int s2 = 0; s2 < sp.num_states; ++s2)
                m += mu(0, s, a, s2);
        k.mu1[s] = m;
        total += m;
    }
    for (int s = 0; s < sp.num_states; ++s)
        k.mu1[s] = total > 0.0 ? k.mu1[s] / total : 1.0 / sp.num_states;
    return k;
}

/// Per-episode reward source. Receives the episode index and the visit counts
/// accumulated from episodes before it (the running episode excluded).
using RewardStream = std::function<RewardFunction(int episode, const VisitCounts& counts)>;

struct EpisodeTrace {
    int episode;
    double constraint_residual;
    double objective;
    double regret_so_far;
    double eta;
};

struct UcorepsResult {
    std::vector<MarkovPolicy> policies;        // pi^1..pi^T
    std::vector<AugmentedOccupancy> iterates;  // mu^1..mu^T (learner iterates)
    std::vector<Trajectory> trajectories;
    VisitCounts counts;
    double eta = 0.0;
};

inline double regret_diagnostic(const std::vector<RewardFunction>& rewards,
                                const std::vector<OccupancyMeasure>& true_occupancies,
                                const TransitionKernel& kernel);

/// Online loop over the shrinking confidence polytopes. Episode t: traverse
/// with pi^t, pull the reward for episode t (counts exclude the fresh
/// trajectory), fold the trajectory into the counts, rebuild the confidence
/// band, take one entropic mirror-descent step and induce pi^{t+1}. The final
/// episode skips the update since its iterate is never played.
inline UcorepsResult ucoreps_run(const TransitionKernel& env, const RewardStream& rewards,
                                 int num_episodes, double reward_bound, double cumulative_bound,
                                 double ell0, RandomSeed seed,
                                 const ProjectionSettings& settings = {},
                                 std::vector<EpisodeTrace>* trace = nullptr) {
    if (num_episodes < 1)
        throw config_error("ucoreps_run: need at least one episode");
    const MdpSpec& sp = env.spec;
    // with one state-action pair there is exactly one policy and nothing to
    // learn; with one episode the update is never reached. G(1) = 0 and
    // ln(|S||A|) = 0 would degenerate the step-size formula in those cases.
    const bool degenerate =
        num_episodes == 1 || (sp.num_states == 1 && sp.num_actions == 1);
    UcorepsResult out;
    out.eta = degenerate ? 0.0 : omd_step_size(reward_bound, cumulative_bound, sp);
    out.counts = VisitCounts(sp);
    out.policies.reserve(num_episodes);
    out.iterates.reserve(num_episodes);
    out.trajectories.reserve(num_episodes);
    out.policies.push_back(MarkovPolicy::uniform(sp));
    out.iterates.push_back(AugmentedOccupancy::uniform(sp));

    // the exact running regret is only assembled when tracing is requested
    std::vector<RewardFunction> reward_history;
    std::vector<OccupancyMeasure> occupancy_history;

    for (int t = 0; t < num_episodes; ++t) {
        out.trajectories.push_back(
            sample_trajectory(env, out.policies[t], Rng::derive(seed, t)));

        const RewardFunction r_t = rewards(t, out.counts);
        detail::require_same_spec(r_t.spec, sp, "ucoreps_run reward");
        for (double v : r_t.r)
            if (std::abs(v) > reward_bound * (1.0 + 1e-12))
                throw config_error("ucoreps_run: reward exceeds bound B at episode " +
                                   std::to_string(t + 1));

        update_counts(out.counts, out.trajectories.back());

        if (degenerate && t + 1 < num_episodes) {
            out.policies.push_back(out.policies[t]);
            out.iterates.push_back(out.iterates[t]);
            continue;
        }
        if (trace) {
            reward_history.push_back(r_t);
            occupancy_history.push_back(occupancy_from_policy(env, out.policies[t]));
        }
        if (t + 1 < num_episodes) {
            const ConstraintPolytope k = build_polytope(empirical_model(out.counts, ell0));
            double residual = 0.0;
            AugmentedOccupancy next =
                entropic_projection(out.iterates[t], r_t, out.eta, k, settings, &residual);
            if (trace)
                trace->push_back({t + 1, residual,
                                  projection_objective(next, r_t, out.eta, out.iterates[t]),
                                  regret_diagnostic(reward_history, occupancy_history, env),
                                  out.eta});
            out.policies.push_back(induced_policy(next));
            out.iterates.push_back(std::move(next));
        }
    }
    return out;
}

/// Regret of an online run against the best fixed occupancy in hindsight:
///   Reg = max_mu sum_t <r^t, mu> - sum_t <r^t, mu^{pi_t, P}>.
/// The max is computed exactly by dynamic programming on the summed rewards;
/// the learner term uses the true realized occupancies, not the iterates.
inline double regret_diagnostic(const std::vector<RewardFunction>& rewards,
                                const std::vector<OccupancyMeasure>& true_occupancies,
                                const TransitionKernel& kernel) {
    if (rewards.size() != true_occupancies.size())
        throw config_error("regret_diagnostic: history lengths differ");
    if (rewards.empty())
        return 0.0;
    const MdpSpec& sp = kernel.spec;
    RewardFunction total(sp, 0.0, 0.0);
    double learner = 0.0;
    for (std::size_t t = 0; t < rewards.size(); ++t) {
        detail::require_same_spec(rewards[t].spec, sp, "regret_diagnostic");
        for (std::size_t i = 0; i < total.r.size(); ++i)
            total.r[i] += rewards[t].r[i];
        learner += expected_return(true_occupancies[t], rewards[t]);
        total.b_max += rewards[t].b_max;
    }
    const double best = dp_optimal(kernel, total).first.initial_value(kernel.mu1);
    return best - learner;
}

} // namespace rfx
