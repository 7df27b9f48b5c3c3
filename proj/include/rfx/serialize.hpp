#pragma once

#include "rfx/estimator.hpp"
#include "rfx/occupancy.hpp"
#include "rfx/planner.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>
#include <string>

namespace rfx {

using json = nlohmann::json;

namespace detail {

// [h][s][a]-shaped nested array from a flat table
inline json nested_hsa(const MdpSpec& sp, const std::vector<double>& flat) {
    json out = json::array();
    for (int h = 0; h < sp.horizon; ++h) {
        json jh = json::array();
        for (int s = 0; s < sp.num_states; ++s) {
            json js = json::array();
            for (int a = 0; a < sp.num_actions; ++a)
                js.push_back(flat[sp.hsa(h, s, a)]);
            jh.push_back(std::move(js));
        }
        out.push_back(std::move(jh));
    }
    return out;
}

inline json nested_hsas(const MdpSpec& sp, const std::vector<double>& flat) {
    json out = json::array();
    for (int h = 0; h < sp.horizon; ++h) {
        json jh = json::array();
        for (int s = 0; s < sp.num_states; ++s) {
            json js = json::array();
            for (int a = 0; a < sp.num_actions; ++a) {
                json ja = json::array();
                for (int s2 = 0; s2 < sp.num_states; ++s2)
                    ja.push_back(flat[sp.hsas(h, s, a, s2)]);
                js.push_back(std::move(ja));
            }
            jh.push_back(std::move(js));
        }
        out.push_back(std::move(jh));
    }
    return out;
}

template <typename T>
inline void flat_hsa(const MdpSpec& sp, const json& arr, std::vector<T>& out) {
    out.assign(sp.size_hsa(), T{});
    for (int h = 0; h < sp.horizon; ++h)
        for (int s = 0; s < sp.num_states; ++s)
            for (int a = 0; a < sp.num_actions; ++a)
                out[sp.hsa(h, s, a)] = arr.at(h).at(s).at(a).get<T>();
}

template <typename T>
inline void flat_hsas(const MdpSpec& sp, const json& arr, std::vector<T>& out) {
    out.assign(sp.size_hsas(), T{});
    for (int h = 0; h < sp.horizon; ++h)
        for (int s = 0; s < sp.num_states; ++s)
            for (int a = 0; a < sp.num_actions; ++a)
                for (int s2 = 0; s2 < sp.num_states; ++s2)
                    out[sp.hsas(h, s, a, s2)] = arr.at(h).at(s).at(a).at(s2).get<T>();
}

} // namespace detail

inline json to_json(const MdpSpec& sp) {
    return {{"num_states", sp.num_states},
            {"num_actions", sp.num_actions},
            {"horizon", sp.horizon}};
}

inline MdpSpec spec_from_json(const json& j) {
    MdpSpec sp{j.at("num_states").get<int>(), j.at("num_actions").get<int>(),
               j.at("horizon").get<int>()};
    sp.validate();
    return sp;
}

inline json to_json(const TransitionKernel& kernel, const RewardFunction* reward = nullptr) {
    json out;
    out["spec"] = to_json(kernel.spec);
    out["mu1"] = kernel.mu1;
    out["P"] = detail::nested_hsas(kernel.spec, kernel.p);
    if (reward) {
        out["r"] = detail::nested_hsa(kernel.spec, reward->r);
        out["b_max"] = reward->b_max;
    }
    return out;
}

inline TransitionKernel kernel_from_json(const json& j) {
    TransitionKernel kernel(spec_from_json(j.at("spec")));
    kernel.mu1 = j.at("mu1").get<std::vector<double>>();
    if (static_cast<int>(kernel.mu1.size()) != kernel.spec.num_states)
        throw config_error("mdp json: mu1 length mismatch");
    detail::flat_hsas(kernel.spec, j.at("P"), kernel.p);
    return kernel;
}

inline bool json_has_reward(const json& j) { return j.contains("r"); }

inline RewardFunction reward_from_mdp_json(const json& j) {
    RewardFunction reward(spec_from_json(j.at("spec")));
    detail::flat_hsa(reward.spec, j.at("r"), reward.r);
    reward.b_max = j.value("b_max", 1.0);
    return reward;
}

inline json to_json(const RewardFunction& reward) {
    return {{"kind", "reward"},
            {"spec", to_json(reward.spec)},
            {"b_max", reward.b_max},
            {"values", detail::nested_hsa(reward.spec, reward.r)}};
}

inline RewardFunction reward_from_json(const json& j) {
    RewardFunction reward(spec_from_json(j.at("spec")));
    reward.b_max = j.value("b_max", 1.0);
    detail::flat_hsa(reward.spec, j.at("values"), reward.r);
    return reward;
}

inline json to_json(const MarkovPolicy& policy) {
    return {{"kind", "policy"},
            {"spec", to_json(policy.spec)},
            {"values", detail::nested_hsa(policy.spec, policy.pi)}};
}

inline MarkovPolicy policy_from_json(const json& j) {
    MarkovPolicy policy(spec_from_json(j.at("spec")));
    detail::flat_hsa(policy.spec, j.at("values"), policy.pi);
    return policy;
}

inline json to_json(const OccupancyMeasure& mu) {
    return {{"kind", "occupancy"},
            {"spec", to_json(mu.spec)},
            {"values", detail::nested_hsa(mu.spec, mu.mu)}};
}

inline json to_json(const AugmentedOccupancy& mu) {
    return {{"kind", "augmented"},
            {"spec", to_json(mu.spec)},
            {"values", detail::nested_hsas(mu.spec, mu.mu)}};
}

inline OccupancyMeasure occupancy_from_json(const json& j) {
    if (j.value("kind", "") != "occupancy")
        throw config_error("occupancy json: wrong kind tag");
    OccupancyMeasure mu(spec_from_json(j.at("spec")));
    detail::flat_hsa(mu.spec, j.at("values"), mu.mu);
    return mu;
}

inline AugmentedOccupancy augmented_from_json(const json& j) {
    if (j.value("kind", "") != "augmented")
        throw config_error("augmented occupancy json: wrong kind tag");
    AugmentedOccupancy mu(spec_from_json(j.at("spec")));
    detail::flat_hsas(mu.spec, j.at("values"), mu.mu);
    return mu;
}

inline json to_json(const VisitCounts& counts) {
    json out;
    out["kind"] = "counts";
    out["spec"] = to_json(counts.spec);
    json sa = json::array(), sas = json::array();
    for (auto v : counts.n_sa)
        sa.push_back(v);
    for (auto v : counts.n_sas)
        sas.push_back(v);
    out["n_sa"] = std::move(sa);
    out["n_sas"] = std::move(sas);
    return out;
}

inline VisitCounts counts_from_json(const json& j) {
    VisitCounts counts(spec_from_json(j.at("spec")));
    counts.n_sa = j.at("n_sa").get<std::vector<std::int64_t>>();
    counts.n_sas = j.at("n_sas").get<std::vector<std::int64_t>>();
    if (counts.n_sa.size() != counts.spec.size_hsa() ||
        counts.n_sas.size() != counts.spec.size_hsas())
        throw config_error("counts json: table size mismatch");
    return counts;
}

inline json to_json(const EmpiricalModel& model) {
    return {{"kind", "empirical_model"},
            {"spec", to_json(model.spec)},
            {"ell0", model.ell0},
            {"p_hat", detail::nested_hsas(model.spec, model.p_hat)},
            {"epsilon", detail::nested_hsas(model.spec, model.radius)}};
}

inline EmpiricalModel model_from_json(const json& j) {
    EmpiricalModel model;
    model.spec = spec_from_json(j.at("spec"));
    model.ell0 = j.at("ell0").get<double>();
    detail::flat_hsas(model.spec, j.at("p_hat"), model.p_hat);
    detail::flat_hsas(model.spec, j.at("epsilon"), model.radius);
    return model;
}

/// Dataset file: JSON lines; a header object followed by one trajectory per
/// line.
inline std::string dataset_to_jsonl(const Dataset& ds) {
    std::ostringstream out;
    json header = {{"kind", "dataset"},
                   {"spec", to_json(ds.spec)},
                   {"seed", ds.seed},
                   {"n", ds.size()},
                   {"policy_hash", ds.policy_hash}};
    out << header.dump() << "\n";
    for (const Trajectory& tr : ds.trajectories) {
        json line = {{"s", tr.states}, {"a", tr.actions}};
        out << line.dump() << "\n";
    }
    return out.str();
}

inline Dataset dataset_from_jsonl(std::istream& in) {
    Dataset ds;
    std::string line;
    if (!std::getline(in, line))
        throw config_error("dataset: empty stream");
    json header = json::parse(line);
    if (header.value("kind", "") != "dataset")
        throw config_error("dataset: missing header line");
    ds.spec = spec_from_json(header.at("spec"));
    ds.seed = header.at("seed").get<RandomSeed>();
    ds.policy_hash = header.at("policy_hash").get<std::uint64_t>();
    const std::int64_t n = header.at("n").get<std::int64_t>();
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        json jt = json::parse(line);
        Trajectory tr;
        tr.states = jt.at("s").get<std::vector<int>>();
        tr.actions = jt.at("a").get<std::vector<int>>();
        ds.trajectories.push_back(std::move(tr));
    }
    if (ds.size() != n)
        throw config_error("dataset: trajectory count differs from header");
    return ds;
}

/// Exploration artifact. Policies are stored delta-compressed: the first
/// policy in full, then only the (h,s) rows that changed.
inline json to_json(const MixturePolicy& mix, const VisitCounts& counts,
                    const ExplorationDiagnostics& diag, const ExplorationConfig& cfg) {
    json out;
    out["kind"] = "exploration";
    out["spec"] = to_json(mix.spec);
    out["config"] = {{"profile", profile_name(cfg.profile)},
                     {"ell0", cfg.ell0},
                     {"c", cfg.c},
                     {"omega", cfg.omega},
                     {"B", cfg.reward_bound},
                     {"T", cfg.num_episodes}};
    const MdpSpec& sp = mix.spec;
    json policies;
    policies["first"] = detail::nested_hsa(sp, mix.components.front().pi);
    json deltas = json::array();
    for (std::size_t t = 1; t < mix.components.size(); ++t) {
        json rows = json::array();
        for (int h = 0; h < sp.horizon; ++h)
            for (int s = 0; s < sp.num_states; ++s) {
                bool changed = false;
                for (int a = 0; a < sp.num_actions; ++a)
                    if (mix.components[t](h, s, a) != mix.components[t - 1](h, s, a)) {
                        changed = true;
                        break;
                    }
                if (changed) {
                    json row = {{"h", h}, {"s", s}, {"p", json::array()}};
                    for (int a = 0; a < sp.num_actions; ++a)
                        row["p"].push_back(mix.components[t](h, s, a));
                    rows.push_back(std::move(row));
                }
            }
        deltas.push_back(std::move(rows));
    }
    policies["deltas"] = std::move(deltas);
    out["policies"] = std::move(policies);
    out["counts"] = to_json(counts);
    out["diagnostics"] = {{"learner_reward", diag.learner_reward},
                          {"G_bound", diag.cumulative_bound},
                          {"eta", diag.eta}};
    return out;
}

inline MixturePolicy mixture_from_json(const json& j, VisitCounts* counts_out = nullptr,
                                       ExplorationDiagnostics* diag_out = nullptr) {
    if (j.value("kind", "") != "exploration")
        throw config_error("exploration artifact: wrong kind tag");
    MixturePolicy mix;
    mix.spec = spec_from_json(j.at("spec"));
    MarkovPolicy current(mix.spec);
    detail::flat_hsa(mix.spec, j.at("policies").at("first"), current.pi);
    mix.components.push_back(current);
    for (const json& rows : j.at("policies").at("deltas")) {
        for (const json& row : rows) {
            const int h = row.at("h").get<int>();
            const int s = row.at("s").get<int>();
            for (int a = 0; a < mix.spec.num_actions; ++a)
                current(h, s, a) = row.at("p").at(a).get<double>();
        }
        mix.components.push_back(current);
    }
    if (counts_out)
        *counts_out = counts_from_json(j.at("counts"));
    if (diag_out) {
        diag_out->learner_reward = j.at("diagnostics").at("learner_reward").get<double>();
        diag_out->cumulative_bound = j.at("diagnostics").at("G_bound").get<double>();
        diag_out->eta = j.at("diagnostics").at("eta").get<double>();
    }
    return mix;
}

inline json to_json(const PessimisticPlan& plan) {
    const MdpSpec& sp = plan.spec;
    json pihat = json::array();
    for (int h = 0; h < sp.horizon; ++h) {
        json row = json::array();
        for (int s = 0; s < sp.num_states; ++s) {
            int act = 0;
            for (int a = 0; a < sp.num_actions; ++a)
                if (plan.policy(h, s, a) == 1.0) {
                    act = a;
                    break;
                }
            row.push_back(act);
        }
        pihat.push_back(std::move(row));
    }
    json vhat = json::array();
    for (int h = 0; h < sp.horizon; ++h) {
        json row = json::array();
        for (int s = 0; s < sp.num_states; ++s)
            row.push_back(plan.values.v[sp.hs(h, s)]);
        vhat.push_back(std::move(row));
    }
    return {{"kind", "plan"},
            {"spec", to_json(sp)},
            {"penalty_kind", setting_name(plan.kind.setting)},
            {"constants",
             {{"c", plan.kind.constant}, {"class_size", plan.kind.class_size}}},
            {"b", detail::nested_hsa(sp, plan.penalty)},
            {"Qhat", detail::nested_hsa(sp, plan.values.q)},
            {"Vhat", std::move(vhat)},
            {"pihat", std::move(pihat)}};
}

inline json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw config_error("cannot open file: " + path);
    json j;
    in >> j;
    return j;
}

inline void save_json_file(const std::string& path, const json& j, int indent = -1) {
    std::ofstream out(path);
    if (!out)
        throw config_error("cannot write file: " + path);
    out << j.dump(indent) << "\n";
}

inline void save_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out)
        throw config_error("cannot write file: " + path);
    out << text;
}

} // namespace rfx
