// Test-only oracles, kept independent of the library's computation paths:
// exhaustive trajectory/policy enumeration, extended-precision recomputation,
// grid search, and a dual solver for the constrained mirror-descent step.
#pragma once

#include "rfx/mdp.hpp"
#include "rfx/occupancy.hpp"
#include "rfx/omd.hpp"

#include <cmath>
#include <functional>
#include <vector>

namespace oracles {

/// Expected return of a policy by exhaustive enumeration of all trajectories,
/// weighted by their probabilities. Exponential; tiny instances only.
inline double enumerate_policy_value(const rfx::TransitionKernel& kernel,
                                     const rfx::RewardFunction& reward,
                                     const rfx::MarkovPolicy& policy) {
    const rfx::MdpSpec& sp = kernel.spec;
    long double total = 0.0L;
    std::function<void(int, int, long double, long double)> walk =
        [&](int h, int s, long double prob, long double running) {
            if (h == sp.horizon) {
                total += prob * running;
                return;
            }
            for (int a = 0; a < sp.num_actions; ++a) {
                const long double pa = policy(h, s, a);
                if (pa == 0.0L)
                    continue;
                for (int s2 = 0; s2 < sp.num_states; ++s2) {
                    const long double pt = kernel(h, s, a, s2);
                    if (pt == 0.0L)
                        continue;
                    walk(h + 1, s2, prob * pa * pt, running + reward(h, s, a));
                }
            }
        };
    for (int s = 0; s < sp.num_states; ++s)
        if (kernel.mu1[s] > 0.0)
            walk(0, s, kernel.mu1[s], 0.0L);
    return static_cast<double>(total);
}

/// Applies `fn` to every deterministic time-dependent policy (|A|^(H|S|) of
/// them).
inline void for_each_deterministic_policy(const rfx::MdpSpec& sp,
                                          const std::function<void(const rfx::MarkovPolicy&)>& fn) {
    const std::size_t cells = sp.size_hs();
    std::vector<int> choice(cells, 0);
    while (true) {
        fn(rfx::MarkovPolicy::deterministic(sp, choice));
        std::size_t i = 0;
        for (; i < cells; ++i) {
            if (++choice[i] < sp.num_actions)
                break;
            choice[i] = 0;
        }
        if (i == cells)
            return;
    }
}

/// Best deterministic-policy value found by exhaustive enumeration, with each
/// policy evaluated by trajectory enumeration.
inline double enumerate_optimal_value(const rfx::TransitionKernel& kernel,
                                      const rfx::RewardFunction& reward) {
    double best = -1e300;
    for_each_deterministic_policy(kernel.spec, [&](const rfx::MarkovPolicy& pi) {
        best = std::max(best, enumerate_policy_value(kernel, reward, pi));
    });
    return best;
}

/// Extended-precision KL Bregman divergence.
inline long double kl_bregman_ld(const std::vector<double>& mu, const std::vector<double>& nu) {
    long double acc = 0.0L;
    for (std::size_t i = 0; i < mu.size(); ++i) {
        const long double x = mu[i], y = nu[i];
        if (x > 0.0L)
            acc += x * std::log(x / y) - x + y;
        else
            acc += y;
    }
    return acc;
}

/// Extended-precision two-pass variance of V under rho.
inline long double variance_ld(const std::vector<double>& rho, const std::vector<double>& v) {
    long double mean = 0.0L;
    for (std::size_t i = 0; i < rho.size(); ++i)
        mean += static_cast<long double>(rho[i]) * v[i];
    long double var = 0.0L;
    for (std::size_t i = 0; i < rho.size(); ++i)
        var += static_cast<long double>(rho[i]) * (v[i] - mean) * (v[i] - mean);
    // matches the sub-stochastic convention sum rho V^2 - (sum rho V)^2 only
    // for stochastic rho; tests use stochastic rows here
    return var;
}

/// A kernel drawn uniformly-ish inside a transition band: each row starts at a
/// random point of the box and is shifted onto the simplex by monotone
/// water-filling, staying inside the bounds.
inline rfx::TransitionKernel random_feasible_kernel(const rfx::ConstraintPolytope& polytope,
                                                    rfx::RandomSeed seed) {
    const rfx::MdpSpec& sp = polytope.spec;
    rfx::TransitionKernel kernel(sp);
    rfx::Rng rng(seed);
    const int S = sp.num_states;
    std::vector<double> q(S);
    for (std::size_t row = 0; row < sp.size_hsa(); ++row) {
        const double* lb = polytope.lower.data() + row * S;
        const double* ub = polytope.upper.data() + row * S;
        for (int j = 0; j < S; ++j)
            q[j] = lb[j] + rng.uniform() * (ub[j] - lb[j]);
        double t_lo = -2.0, t_hi = 2.0;
        for (int it = 0; it < 200; ++it) {
            const double t = 0.5 * (t_lo + t_hi);
            double sum = 0.0;
            for (int j = 0; j < S; ++j)
                sum += std::min(std::max(q[j] + t, lb[j]), ub[j]);
            (sum < 1.0 ? t_lo : t_hi) = t;
        }
        const double t = 0.5 * (t_lo + t_hi);
        for (int j = 0; j < S; ++j)
            kernel.p[row * S + j] = std::min(std::max(q[j] + t, lb[j]), ub[j]);
    }
    rng.dirichlet_uniform(kernel.mu1.data(), S);
    return kernel;
}

struct DualOracleResult {
    double objective = 0.0; // optimum of eta <mu, r> - D(mu || mu_prev) over K
    double kkt_residual = 1.0;
    bool converged = false;
};

/// Independent reference for the constrained mirror-descent step: projected
/// gradient ascent on the Lagrangian dual of min D(mu || mu_prev e^{eta r})
/// over the polytope. Duals: v (normalization, free), w (flow, free),
/// alpha/beta >= 0 (upper/lower band). The dual value is available in closed
/// form, and its gradient equals the constraint violations of mu(theta).
inline DualOracleResult dual_projection_oracle(const rfx::AugmentedOccupancy& mu_prev,
                                               const rfx::RewardFunction& reward, double eta,
                                               const rfx::ConstraintPolytope& polytope,
                                               int max_iters = 400000, double tol = 1e-11) {
    const rfx::MdpSpec& sp = mu_prev.spec;
    const int S = sp.num_states, A = sp.num_actions, H = sp.horizon;
    const std::size_t dim = sp.size_hsas();

    std::vector<double> tilde(dim);
    double sum_tilde = 0.0, sum_prev = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
        double e = eta * reward.r[i / S];
        e = std::min(std::max(e, -700.0), 700.0);
        tilde[i] = std::max(mu_prev.mu[i], 1e-300) * std::exp(e);
        sum_tilde += tilde[i];
        sum_prev += mu_prev.mu[i];
    }
    const double constant = sum_tilde - sum_prev;

    std::vector<double> v(H, 0.0), w(static_cast<std::size_t>(std::max(H - 1, 0)) * S, 0.0);
    std::vector<double> alpha(dim, 0.0), beta(dim, 0.0);
    std::vector<double> mu(dim), grad_v(H), grad_w(w.size()), grad_a(dim), grad_b(dim);

    auto eval = [&](const std::vector<double>& vv, const std::vector<double>& ww,
                    const std::vector<double>& aa, const std::vector<double>& bb,
                    std::vector<double>& out_mu) {
        double sum_mu = 0.0;
        for (int h = 0; h < H; ++h)
            for (int s = 0; s < S; ++s)
                for (int a = 0; a < A; ++a) {
                    const std::size_t row = sp.hsa(h, s, a);
                    double alpha_ub = 0.0, beta_lb = 0.0;
                    for (int j = 0; j < S; ++j) {
                        alpha_ub += aa[row * S + j] * polytope.upper[row * S + j];
                        beta_lb += bb[row * S + j] * polytope.lower[row * S + j];
                    }
                    for (int s2 = 0; s2 < S; ++s2) {
                        const std::size_t idx = row * S + s2;
                        double e = vv[h];
                        if (h + 1 < H)
                            e += ww[static_cast<std::size_t>(h) * S + s2];
                        if (h > 0)
                            e -= ww[static_cast<std::size_t>(h - 1) * S + s];
                        e += aa[idx] - alpha_ub;
                        e += beta_lb - bb[idx];
                        e = std::min(std::max(e, -700.0), 700.0);
                        out_mu[idx] = tilde[idx] * std::exp(-e);
                        sum_mu += out_mu[idx];
                    }
                }
        double dual = sum_tilde - sum_mu;
        for (int h = 0; h < H; ++h)
            dual -= vv[h];
        return dual;
    };

    auto gradients = [&](const std::vector<double>& m) {
        double res = 0.0;
        for (int h = 0; h < H; ++h) {
            double sum = 0.0;
            for (int s = 0; s < S; ++s)
                for (int a = 0; a < A; ++a)
                    for (int s2 = 0; s2 < S; ++s2)
                        sum += m[sp.hsas(h, s, a, s2)];
            grad_v[h] = sum - 1.0;
            res = std::max(res, std::abs(grad_v[h]));
        }
        for (int h = 0; h + 1 < H; ++h)
            for (int s2 = 0; s2 < S; ++s2) {
                double in = 0.0, out = 0.0;
                for (int s = 0; s < S; ++s)
                    for (int a = 0; a < A; ++a)
                        in += m[sp.hsas(h, s, a, s2)];
                for (int a = 0; a < A; ++a)
                    for (int s3 = 0; s3 < S; ++s3)
                        out += m[sp.hsas(h + 1, s2, a, s3)];
                grad_w[static_cast<std::size_t>(h) * S + s2] = in - out;
                res = std::max(res, std::abs(in - out));
            }
        for (std::size_t row = 0; row < sp.size_hsa(); ++row) {
            double rowsum = 0.0;
            for (int j = 0; j < S; ++j)
                rowsum += m[row * S + j];
            for (int j = 0; j < S; ++j) {
                const std::size_t idx = row * S + j;
                grad_a[idx] = m[idx] - polytope.upper[idx] * rowsum;     // <= 0 feasible
                grad_b[idx] = polytope.lower[idx] * rowsum - m[idx];     // <= 0 feasible
                res = std::max(res, grad_a[idx]);
                res = std::max(res, grad_b[idx]);
                // complementary slackness for active multipliers
                res = std::max(res, std::abs(alpha[idx] * grad_a[idx]));
                res = std::max(res, std::abs(beta[idx] * grad_b[idx]));
            }
        }
        return res;
    };

    double dual = eval(v, w, alpha, beta, mu);
    double step = 1.0;
    DualOracleResult result;
    std::vector<double> v2, w2, a2, b2, mu2(dim);
    for (int it = 0; it < max_iters; ++it) {
        const double res = gradients(mu);
        if (res < tol) {
            result.converged = true;
            result.kkt_residual = res;
            break;
        }
        result.kkt_residual = res;
        bool accepted = false;
        for (int bt = 0; bt < 60 && !accepted; ++bt) {
            v2 = v;
            w2 = w;
            a2 = alpha;
            b2 = beta;
            for (int h = 0; h < H; ++h)
                v2[h] += step * grad_v[h];
            for (std::size_t i = 0; i < w2.size(); ++i)
                w2[i] += step * grad_w[i];
            for (std::size_t i = 0; i < dim; ++i) {
                a2[i] = std::max(0.0, a2[i] + step * grad_a[i]);
                b2[i] = std::max(0.0, b2[i] + step * grad_b[i]);
            }
            const double dual2 = eval(v2, w2, a2, b2, mu2);
            if (dual2 >= dual - 1e-14) {
                v.swap(v2);
                w.swap(w2);
                alpha.swap(a2);
                beta.swap(b2);
                mu.swap(mu2);
                dual = dual2;
                step *= 1.25;
                accepted = true;
            } else {
                step *= 0.5;
            }
        }
        if (!accepted)
            break; // step collapsed; report best so far
    }
    result.objective = constant - dual;
    return result;
}

} // namespace oracles
