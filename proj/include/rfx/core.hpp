#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace rfx {

// Thrown on malformed inputs: shape mismatches, bad parameter ranges,
// unreadable configuration.
class config_error : public std::runtime_error {
  public:
    explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

// Thrown when an iterative solver fails to reach its tolerances. Carries the
// best iterate found and the residuals at the point of failure.
class convergence_error : public std::runtime_error {
  public:
    convergence_error(const std::string& what, std::vector<double> best_iterate,
                      double constraint_residual, double successive_kl)
        : std::runtime_error(what), best_iterate(std::move(best_iterate)),
          constraint_residual(constraint_residual), successive_kl(successive_kl) {}

    std::vector<double> best_iterate;
    double constraint_residual;
    double successive_kl;
};

// Thrown when a requested run exceeds a configured cap (episode or sample
// budgets too large to execute).
class cap_exceeded_error : public std::runtime_error {
  public:
    explicit cap_exceeded_error(const std::string& what) : std::runtime_error(what) {}
};

/// Dimensions of a finite-horizon tabular MDP: |S| states, |A| actions,
/// horizon H. Time-inhomogeneous throughout; every per-step table is stored
/// explicitly for each h.
struct MdpSpec {
    int num_states = 1;
    int num_actions = 1;
    int horizon = 1;

    bool operator==(const MdpSpec& o) const {
        return num_states == o.num_states && num_actions == o.num_actions &&
               horizon == o.horizon;
    }
    bool operator!=(const MdpSpec& o) const { return !(*this == o); }

    void validate() const {
        if (num_states < 1 || num_actions < 1 || horizon < 1)
            throw config_error("MdpSpec: all dimensions must be >= 1");
    }

    // flat index helpers; layout is row-major over (h, s, a[, s'])
    std::size_t hs(int h, int s) const {
        return static_cast<std::size_t>(h) * num_states + s;
    }
    std::size_t hsa(int h, int s, int a) const {
        return (static_cast<std::size_t>(h) * num_states + s) * num_actions + a;
    }
    std::size_t hsas(int h, int s, int a, int s2) const {
        return ((static_cast<std::size_t>(h) * num_states + s) * num_actions + a) *
                   num_states +
               s2;
    }
    std::size_t size_hs() const {
        return static_cast<std::size_t>(horizon) * num_states;
    }
    std::size_t size_hsa() const {
        return static_cast<std::size_t>(horizon) * num_states * num_actions;
    }
    std::size_t size_hsas() const { return size_hsa() * num_states; }
};

using RandomSeed = std::uint64_t;

} // namespace rfx
