#pragma once

#include "rfx/mdp.hpp"

#include <cmath>
#include <cstdint>
#include <vector>

namespace rfx {

/// Episode-accumulated visit counts n_h(s,a) and n_h(s,a,s'). Pair counts are
/// always the next-state marginals of the triple counts.
struct VisitCounts {
    MdpSpec spec;
    std::vector<std::int64_t> n_sa;  // [h][s][a]
    std::vector<std::int64_t> n_sas; // [h][s][a][s']

    VisitCounts() = default;
    explicit VisitCounts(const MdpSpec& sp)
        : spec(sp), n_sa(sp.size_hsa(), 0), n_sas(sp.size_hsas(), 0) {}

    std::int64_t pair(int h, int s, int a) const { return n_sa[spec.hsa(h, s, a)]; }
    std::int64_t triple(int h, int s, int a, int s2) const {
        return n_sas[spec.hsas(h, s, a, s2)];
    }
};

/// Empirical kernel P_hat plus the Bernstein confidence radii around it.
/// Unvisited (h,s,a) rows are identically zero (max{1,N} convention).
struct EmpiricalModel {
    MdpSpec spec;
    std::vector<double> p_hat;   // [h][s][a][s']
    std::vector<double> radius;  // [h][s][a][s']
    double ell0 = 0.0;

    double phat(int h, int s, int a, int s2) const { return p_hat[spec.hsas(h, s, a, s2)]; }
    double eps(int h, int s, int a, int s2) const { return radius[spec.hsas(h, s, a, s2)]; }
    const double* phat_row(int h, int s, int a) const {
        return p_hat.data() + spec.hsas(h, s, a, 0);
    }
};

/// Applies one trajectory: exactly H pair increments and H triple increments.
inline void update_counts(VisitCounts& counts, const Trajectory& tr) {
    const MdpSpec& sp = counts.spec;
    if (tr.horizon() != sp.horizon || static_cast<int>(tr.states.size()) != sp.horizon + 1)
        throw config_error("update_counts: trajectory length does not match horizon");
    for (int h = 0; h < sp.horizon; ++h) {
        const int s = tr.states[h];
        const int a = tr.actions[h];
        const int s2 = tr.states[h + 1];
        if (s < 0 || s >= sp.num_states || a < 0 || a >= sp.num_actions || s2 < 0 ||
            s2 >= sp.num_states)
            throw config_error("update_counts: trajectory index out of range");
        ++counts.n_sa[sp.hsa(h, s, a)];
        ++counts.n_sas[sp.hsas(h, s, a, s2)];
    }
}

/// Empirical kernel P_hat_h(s'|s,a) = n_h(s,a,s') / max{1, n_h(s,a)}.
/// Rows with no visits stay all-zero rather than being imputed.
inline std::vector<double> empirical_kernel(const VisitCounts& counts) {
    const MdpSpec& sp = counts.spec;
    std::vector<double> p_hat(sp.size_hsas(), 0.0);
    for (std::size_t i = 0; i < counts.n_sa.size(); ++i) {
        const double denom = static_cast<double>(counts.n_sa[i] > 0 ? counts.n_sa[i] : 1);
        for (int s2 = 0; s2 < sp.num_states; ++s2) {
            const std::size_t j = i * sp.num_states + s2;
            p_hat[j] = static_cast<double>(counts.n_sas[j]) / denom;
        }
    }
    return p_hat;
}

/// Bernstein radius
///   eps_h(s'|s,a) = 2 sqrt(P_hat ell0 / max{N,1}) + 14 ell0 / (3 max{N,1}).
inline std::vector<double> bernstein_radius(const std::vector<double>& p_hat,
                                            const VisitCounts& counts, double ell0) {
    if (!(ell0 > 0.0))
        throw config_error("bernstein_radius: ell0 must be positive");
    const MdpSpec& sp = counts.spec;
    std::vector<double> radius(sp.size_hsas(), 0.0);
    for (std::size_t i = 0; i < counts.n_sa.size(); ++i) {
        const double n = static_cast<double>(counts.n_sa[i] > 0 ? counts.n_sa[i] : 1);
        for (int s2 = 0; s2 < sp.num_states; ++s2) {
            const std::size_t j = i * sp.num_states + s2;
            radius[j] = 2.0 * std::sqrt(p_hat[j] * ell0 / n) + 14.0 * ell0 / (3.0 * n);
        }
    }
    return radius;
}

/// Assembles the empirical model (kernel + radii) from counts.
inline EmpiricalModel empirical_model(const VisitCounts& counts, double ell0) {
    EmpiricalModel m;
    m.spec = counts.spec;
    m.ell0 = ell0;
    m.p_hat = empirical_kernel(counts);
    m.radius = bernstein_radius(m.p_hat, counts, ell0);
    return m;
}

/// Global logarithmic factor ell0 = ln(|S||A|H / (delta * eps)), computed once
/// per experiment and threaded everywhere. `extra` adds ln(class size) for a
/// declared reward class.
inline double log_factor(const MdpSpec& spec, double delta, double eps, double extra = 0.0) {
    if (!(delta > 0.0 && delta < 1.0))
        throw config_error("log_factor: delta must lie in (0,1)");
    if (!(eps > 0.0))
        throw config_error("log_factor: eps must be positive");
    const double arg = static_cast<double>(spec.num_states) * spec.num_actions * spec.horizon /
                       (delta * eps);
    if (!(arg > 0.0))
        throw config_error("log_factor: nonpositive log argument");
    return std::log(arg) + extra;
}

} // namespace rfx
