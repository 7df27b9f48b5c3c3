#pragma once

#include "rfx/mdp.hpp"

namespace rfx {

/// Random instance with Dirichlet(1,...,1) transition rows per (h,s,a) and a
/// uniform initial distribution. The serialized JSON instance, not the
/// generator, is the cross-implementation exchange format.
inline TransitionKernel random_mdp(const MdpSpec& spec, RandomSeed seed) {
    spec.validate();
    TransitionKernel kernel(spec);
    Rng rng(Rng::derive(seed, 0xd1c));
    for (std::size_t row = 0; row < spec.size_hsa(); ++row)
        rng.dirichlet_uniform(kernel.p.data() + row * spec.num_states, spec.num_states);
    for (int s = 0; s < spec.num_states; ++s)
        kernel.mu1[s] = 1.0 / spec.num_states;
    return kernel;
}

/// Random reward with i.i.d. uniform [0,1] entries.
inline RewardFunction random_reward(const MdpSpec& spec, RandomSeed seed) {
    spec.validate();
    RewardFunction reward(spec, 0.0, 1.0);
    Rng rng(Rng::derive(seed, 0x4e4d));
    for (double& v : reward.r)
        v = rng.uniform();
    return reward;
}

/// Random policy with Dirichlet(1,...,1) action rows.
inline MarkovPolicy random_policy(const MdpSpec& spec, RandomSeed seed) {
    spec.validate();
    MarkovPolicy policy(spec);
    Rng rng(Rng::derive(seed, 0x90c7));
    for (std::size_t row = 0; row < spec.size_hsa() / spec.num_actions; ++row)
        rng.dirichlet_uniform(policy.pi.data() + row * spec.num_actions, spec.num_actions);
    return policy;
}

} // namespace rfx
