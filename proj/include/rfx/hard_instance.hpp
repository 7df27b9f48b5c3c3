#pragma once

#include "rfx/mdp.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace rfx {

/// Parameters of the lower-bound instance family: a deterministic binary tree
/// of depth log2(n) over n leaves, each leaf feeding time-dependent
/// perturbed-uniform transitions into 2n absorbing final states, with rewards
/// that force the optimal policy to leave the initial state exactly at step
/// exit_step and to reach leaf target_leaf.
struct HardInstanceParams {
    int num_leaves = 2;       // n, a power of two; states total 4n - 1
    int horizon = 8;          // H
    int exit_step = 1;        // h', 1-based, at most ceil(H/4)
    int target_leaf = 1;      // x', 1-based leaf index in [n]
    int num_actions = 3;      // |A|, partitioned into stay/up/down classes
    std::vector<double> nu;   // [exit_step][2n] absorbing rewards, row exit_step-1 is used

    int tree_depth() const { // l_end = log2 n
        int d = 0, m = num_leaves;
        while (m > 1) {
            m >>= 1;
            ++d;
        }
        return d;
    }
    int num_states() const { return 4 * num_leaves - 1; }
    double perturbation() const { return 1.0 / (8.0 * horizon); } // eps0

    // action classes: stay = [0,k), up = [k,2k), down = [2k,|A|), k = |A|/3
    int class_size() const { return num_actions / 3; }
    bool is_stay(int a) const { return a < class_size(); }
    bool is_up(int a) const { return a >= class_size() && a < 2 * class_size(); }
    bool is_down(int a) const { return a >= 2 * class_size(); }

    void validate() const {
        if (num_leaves < 2 || (num_leaves & (num_leaves - 1)) != 0)
            throw config_error("hard instance: n must be a power of two, at least 2");
        if (num_actions < 3)
            throw config_error("hard instance: need at least 3 actions for the class partition");
        if (exit_step < 1 || exit_step > (horizon + 3) / 4)
            throw config_error("hard instance: exit step must lie in [1, ceil(H/4)]");
        if (horizon < tree_depth() + exit_step + 1)
            throw config_error("hard instance: H must be at least l_end + h' + 1");
        if (target_leaf < 1 || target_leaf > num_leaves)
            throw config_error("hard instance: target leaf out of range");
        if (nu.size() != static_cast<std::size_t>(exit_step) * 2 * num_leaves)
            throw config_error("hard instance: nu must have shape [h'][2n]");
        for (double v : nu)
            if (v < 0.0 || v > 1.0)
                throw config_error("hard instance: nu entries must lie in [0,1]");
    }

    static std::vector<double> nu_zero(int exit_step, int num_leaves) {
        return std::vector<double>(static_cast<std::size_t>(exit_step) * 2 * num_leaves, 0.0);
    }
    static std::vector<double> nu_uniform(int exit_step, int num_leaves, RandomSeed seed) {
        std::vector<double> out(static_cast<std::size_t>(exit_step) * 2 * num_leaves);
        Rng rng(seed);
        for (double& v : out)
            v = rng.uniform();
        return out;
    }

    // state ids: tree layer l keeps states 2^l-1 .. 2^{l+1}-2 (x is 1-based
    // within the layer); the final layer occupies 2n-1 .. 4n-2
    int tree_state(int layer, int x) const { return (1 << layer) - 1 + (x - 1); }
    int final_state(int x) const { return 2 * num_leaves - 1 + (x - 1); }
    bool is_final(int sid) const { return sid >= 2 * num_leaves - 1; }
    int layer_of(int sid) const {
        int l = 0;
        while ((2 << l) - 2 < sid)
            ++l;
        return l; // valid for tree states only
    }

    /// Direction of the correct move toward the target leaf from tree layer
    /// `layer` along the unique root-to-target path: true = up (left child).
    bool path_goes_up(int layer) const {
        const int bits = tree_depth();
        const int path = target_leaf - 1; // binary expansion, MSB first
        return ((path >> (bits - 1 - layer)) & 1) == 0;
    }
};

struct HardMdp {
    HardInstanceParams params;
    TransitionKernel kernel;
    RewardFunction reward;
};

/// Transition side of the construction: deterministic stay/up/down moves in
/// the tree, absorbing final layer, and for every (leaf, h, a) an independent
/// seeded perturbed-uniform row (1 +- eps0)/(2n) over the final layer with
/// exactly n positive signs.
inline TransitionKernel build_hard_transitions(const HardInstanceParams& params,
                                               RandomSeed seed) {
    params.validate();
    const int n = params.num_leaves;
    const int depth = params.tree_depth();
    MdpSpec sp{params.num_states(), params.num_actions, params.horizon};
    TransitionKernel kernel(sp);
    kernel.mu1.assign(sp.num_states, 0.0);
    kernel.mu1[0] = 1.0; // start at the root

    std::vector<int> signs(2 * n);
    for (int h = 0; h < sp.horizon; ++h) {
        // root: stay keeps the state, up/down enter the tree
        for (int a = 0; a < sp.num_actions; ++a) {
            int next = 0;
            if (params.is_up(a))
                next = params.tree_state(1, 1);
            else if (params.is_down(a))
                next = params.tree_state(1, 2);
            kernel(h, 0, a, next) = 1.0;
        }
        // internal layers: up -> child 2x-1, down -> child 2x; stay-class
        // actions have no defined role off the root and are mapped to up
        for (int l = 1; l < depth; ++l)
            for (int x = 1; x <= (1 << l); ++x) {
                const int sid = params.tree_state(l, x);
                for (int a = 0; a < sp.num_actions; ++a) {
                    const int child = params.is_down(a) ? params.tree_state(l + 1, 2 * x)
                                                        : params.tree_state(l + 1, 2 * x - 1);
                    kernel(h, sid, a, child) = 1.0;
                }
            }
        // leaves: independent near-uniform rows into the final layer
        for (int x = 1; x <= n; ++x) {
            const int sid = params.tree_state(depth, x);
            for (int a = 0; a < sp.num_actions; ++a) {
                Rng rng(Rng::derive(seed, (static_cast<std::uint64_t>(h) * sp.num_states + sid) *
                                              sp.num_actions +
                                          a));
                // balanced sign pattern: n entries +1, n entries -1
                for (int i = 0; i < 2 * n; ++i)
                    signs[i] = i < n ? 1 : -1;
                for (int i = 2 * n - 1; i > 0; --i)
                    std::swap(signs[i], signs[rng.uniform_int(i + 1)]);
                for (int i = 0; i < 2 * n; ++i)
                    kernel(h, sid, a, params.final_state(i + 1)) =
                        (1.0 + signs[i] * params.perturbation()) / (2.0 * n);
            }
        }
        // final layer: absorbing under every action
        for (int x = 1; x <= 2 * n; ++x) {
            const int sid = params.final_state(x);
            for (int a = 0; a < sp.num_actions; ++a)
                kernel(h, sid, a, sid) = 1.0;
        }
    }
    return kernel;
}

/// Reward side of the construction (case table of the exit-time reward
/// class): 1 for staying at the root before h', 1 for the correct first tree
/// move at h', 1 at the target leaf exactly at h' + l_end, nu at final-layer
/// states strictly after h' + l_end, 0 everywhere else.
inline RewardFunction build_hard_reward(const HardInstanceParams& params) {
    params.validate();
    const int n = params.num_leaves;
    const int depth = params.tree_depth();
    const int hprime = params.exit_step;       // 1-based
    const int target_time = hprime + depth;    // 1-based arrival time at the leaf layer
    MdpSpec sp{params.num_states(), params.num_actions, params.horizon};
    RewardFunction reward(sp, 0.0, 1.0);

    const bool exit_up = params.path_goes_up(0);
    for (int h1 = 1; h1 <= sp.horizon; ++h1) { // 1-based time
        const int h = h1 - 1;
        // root
        for (int a = 0; a < sp.num_actions; ++a) {
            if (h1 < hprime && params.is_stay(a))
                reward(h, 0, a) = 1.0;
            if (h1 == hprime && (exit_up ? params.is_up(a) : params.is_down(a)))
                reward(h, 0, a) = 1.0;
        }
        // target leaf at the designated time
        if (h1 == target_time) {
            const int sid = params.tree_state(depth, params.target_leaf);
            for (int a = 0; a < sp.num_actions; ++a)
                reward(h, sid, a) = 1.0;
        }
        // absorbing tail
        if (h1 > target_time)
            for (int x = 1; x <= 2 * n; ++x) {
                const double v =
                    params.nu[static_cast<std::size_t>(hprime - 1) * 2 * n + (x - 1)];
                for (int a = 0; a < sp.num_actions; ++a)
                    reward(h, params.final_state(x), a) = v;
            }
    }
    return reward;
}

inline HardMdp build_hard_mdp(const HardInstanceParams& params, RandomSeed seed) {
    HardMdp out;
    out.params = params;
    out.kernel = build_hard_transitions(params, seed);
    out.reward = build_hard_reward(params);
    return out;
}

struct HardInstanceViolation {
    int h, s, a;
    std::string what;
};

/// Structural validation of a generated instance: deterministic tree rows,
/// near-uniform leaf rows within eps0/(2n) of 1/(2n), absorbing final layer,
/// and the reward case table reproduced cellwise.
inline std::vector<HardInstanceViolation> verify_hard_instance(const HardMdp& mdp) {
    const HardInstanceParams& params = mdp.params;
    const MdpSpec& sp = mdp.kernel.spec;
    const int n = params.num_leaves;
    const int depth = params.tree_depth();
    std::vector<HardInstanceViolation> out;

    const RewardFunction expected_reward = build_hard_reward(params);
    for (int h = 0; h < sp.horizon; ++h)
        for (int s = 0; s < sp.num_states; ++s)
            for (int a = 0; a < sp.num_actions; ++a)
                if (mdp.reward(h, s, a) != expected_reward(h, s, a))
                    out.push_back({h, s, a, "reward cell differs from the case table"});

    for (int h = 0; h < sp.horizon; ++h) {
        for (int s = 0; s < sp.num_states; ++s)
            for (int a = 0; a < sp.num_actions; ++a) {
                const double* row = mdp.kernel.row(h, s, a);
                if (params.is_final(s)) {
                    if (row[s] != 1.0)
                        out.push_back({h, s, a, "final-layer state is not absorbing"});
                    continue;
                }
                const int layer = params.layer_of(s);
                if (layer < depth) {
                    int ones = 0, mass_elsewhere = 0;
                    for (int s2 = 0; s2 < sp.num_states; ++s2) {
                        if (row[s2] == 1.0)
                            ++ones;
                        else if (row[s2] != 0.0)
                            ++mass_elsewhere;
                    }
                    if (ones != 1 || mass_elsewhere != 0)
                        out.push_back({h, s, a, "tree row is not deterministic"});
                } else {
                    const double center = 1.0 / (2.0 * n);
                    const double slack = params.perturbation() / (2.0 * n) + 1e-15;
                    double sum = 0.0;
                    for (int x = 1; x <= 2 * n; ++x) {
                        const double p = row[params.final_state(x)];
                        if (std::abs(p - center) > slack)
                            out.push_back({h, s, a, "leaf row strays from near-uniform"});
                        sum += p;
                    }
                    for (int s2 = 0; s2 < 2 * n - 1; ++s2)
                        if (row[s2] != 0.0)
                            out.push_back({h, s, a, "leaf row leaks into the tree"});
                    if (std::abs(sum - 1.0) > 1e-12)
                        out.push_back({h, s, a, "leaf row does not sum to 1"});
                }
            }
    }
    return out;
}

/// Step (1-based) at which the greedy optimal policy first leaves the root,
/// found by exact planning and a deterministic rollout through the tree part.
inline int optimal_exit_time(const HardMdp& mdp) {
    const auto [values, greedy] = dp_optimal(mdp.kernel, mdp.reward);
    int s = 0;
    for (int h = 0; h < mdp.kernel.spec.horizon; ++h) {
        int action = 0;
        for (int a = 0; a < mdp.kernel.spec.num_actions; ++a)
            if (greedy(h, s, a) == 1.0) {
                action = a;
                break;
            }
        if (!mdp.params.is_stay(action))
            return h + 1;
        // stay keeps the agent at the root by construction
    }
    return mdp.kernel.spec.horizon + 1; // never left
}

} // namespace rfx
