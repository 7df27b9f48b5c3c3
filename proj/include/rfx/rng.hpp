#pragma once

#include "rfx/core.hpp"

#include <cmath>
#include <cstdint>
#include <vector>

namespace rfx {

// Deterministic, implementation-independent random source. std::mt19937_64
// drives the bit stream, but all distributions are hand-rolled so sampled
// values do not depend on the standard library's distribution internals.
class Rng {
  public:
    explicit Rng(RandomSeed seed) : state_(splitmix64(seed ^ 0x9e3779b97f4a7c15ull)) {
        // warm up: decorrelate small seeds
        for (int i = 0; i < 4; ++i)
            next_u64();
    }

    static std::uint64_t splitmix64(std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ull;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
        return x ^ (x >> 31);
    }

    /// Derives an independent substream seed, e.g. per episode or per stage.
    static RandomSeed derive(RandomSeed base, std::uint64_t stream) {
        return splitmix64(base ^ splitmix64(stream + 0x632be59bd9b4e019ull));
    }

    std::uint64_t next_u64() {
        state_ = splitmix64(state_);
        return state_;
    }

    /// Uniform double in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform double in (0, 1] (safe as a log argument).
    double uniform_pos() { return 1.0 - uniform(); }

    /// Uniform integer in [0, n).
    int uniform_int(int n) {
        return static_cast<int>(next_u64() % static_cast<std::uint64_t>(n));
    }

    /// Samples an index from an unnormalized nonnegative weight vector by CDF
    /// inversion. Weights summing to zero yield index 0.
    int categorical(const double* w, int n) {
        double total = 0.0;
        for (int i = 0; i < n; ++i)
            total += w[i];
        if (total <= 0.0)
            return 0;
        const double u = uniform() * total;
        double acc = 0.0;
        for (int i = 0; i < n; ++i) {
            acc += w[i];
            if (u < acc)
                return i;
        }
        return n - 1; // rounding fell off the end
    }

    int categorical(const std::vector<double>& w) {
        return categorical(w.data(), static_cast<int>(w.size()));
    }

    /// Dirichlet(1,...,1) row via normalized Exp(1) draws.
    void dirichlet_uniform(double* out, int n) {
        double total = 0.0;
        for (int i = 0; i < n; ++i) {
            out[i] = -std::log(uniform_pos());
            total += out[i];
        }
        for (int i = 0; i < n; ++i)
            out[i] /= total;
    }

  private:
    std::uint64_t state_;
};

} // namespace rfx
