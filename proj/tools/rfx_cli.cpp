// Command-line harness: exploration, estimation, planning, the full
// pipeline, sweeps, hard-instance generation and diagnostic checks. All
// experiment parameters come from a JSON config file; artifacts are JSON.
#include "rfx/harness.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <string>

namespace {

using rfx::json;

struct GlobalArgs {
    std::string config_path;
    rfx::RandomSeed seed = 1;
    std::string out;
    std::string profile; // empty = config/default
};

rfx::ExperimentConfig load_config(const GlobalArgs& args) {
    rfx::ExperimentConfig cfg;
    json j = json::object();
    if (!args.config_path.empty())
        j = rfx::load_json_file(args.config_path);

    if (j.contains("mdp")) {
        const json& m = j["mdp"];
        if (m.contains("file")) {
            cfg.source.kind = rfx::MdpSource::Kind::file;
            cfg.source.path = m["file"].get<std::string>();
        } else if (m.contains("random")) {
            cfg.source.kind = rfx::MdpSource::Kind::random;
            const json& r = m["random"];
            cfg.source.random_spec = rfx::MdpSpec{r.at("num_states").get<int>(),
                                                  r.at("num_actions").get<int>(),
                                                  r.at("horizon").get<int>()};
            cfg.source.mdp_seed = r.value("seed", 1ull);
        } else if (m.contains("hard")) {
            cfg.source.kind = rfx::MdpSource::Kind::hard;
            const json& hgen = m["hard"];
            rfx::HardInstanceParams& p = cfg.source.hard;
            p.num_leaves = hgen.at("n").get<int>();
            p.horizon = hgen.at("H").get<int>();
            p.exit_step = hgen.at("hprime").get<int>();
            p.target_leaf = hgen.at("xprime").get<int>();
            p.num_actions = hgen.value("num_actions", 3);
            const std::string nu = hgen.value("nu", "zero");
            cfg.source.mdp_seed = hgen.value("seed", 1ull);
            p.nu = nu == "uniform"
                       ? rfx::HardInstanceParams::nu_uniform(p.exit_step, p.num_leaves,
                                                             cfg.source.mdp_seed + 1)
                       : rfx::HardInstanceParams::nu_zero(p.exit_step, p.num_leaves);
        } else {
            throw rfx::config_error("config: mdp must be file, random or hard");
        }
    }
    cfg.eps = j.value("eps", cfg.eps);
    cfg.delta = j.value("delta", cfg.delta);
    if (j.contains("setting"))
        cfg.setting = j["setting"].get<std::string>() == "rae"
                          ? rfx::ExplorationSetting::reward_agnostic
                          : rfx::ExplorationSetting::reward_free;
    std::string profile = j.value("profile", "practical");
    if (!args.profile.empty())
        profile = args.profile;
    cfg.profile = profile == "theory" ? rfx::ConstantProfile::theory
                                      : rfx::ConstantProfile::practical;
    if (j.contains("reward_class"))
        cfg.reward_class_files = j["reward_class"].get<std::vector<std::string>>();
    cfg.num_eval_rewards = j.value("num_eval_rewards", cfg.num_eval_rewards);
    cfg.penalty_constant = j.value("penalty_constant", cfg.penalty_constant);
    if (j.contains("seeds"))
        cfg.seeds = j["seeds"].get<std::vector<rfx::RandomSeed>>();
    if (j.contains("n_grid"))
        cfg.n_grid = j["n_grid"].get<std::vector<std::int64_t>>();
    if (j.contains("t_grid"))
        cfg.t_grid = j["t_grid"].get<std::vector<std::int64_t>>();
    cfg.episodes_override = j.value("T", cfg.episodes_override);
    cfg.trajectories_override = j.value("N", cfg.trajectories_override);
    cfg.episode_cap = j.value("episode_cap", cfg.episode_cap);
    cfg.budget_cap = j.value("budget_cap", cfg.budget_cap);
    cfg.timing = j.value("timing", cfg.timing);
    if (j.contains("multipliers")) {
        const json& m = j["multipliers"];
        cfg.multipliers.c_mult = m.value("c", 0.0);
        cfg.multipliers.omega_mult = m.value("omega", 0.0);
        cfg.multipliers.t_mult = m.value("t", 0.0);
    }
    cfg.out_dir = j.value("out_dir", std::string());
    return cfg;
}

// --out wins; otherwise the config's out_dir provides a default file name
GlobalArgs with_output(GlobalArgs args, const rfx::ExperimentConfig& cfg,
                       const char* default_name) {
    if (args.out.empty() && !cfg.out_dir.empty())
        args.out = cfg.out_dir + "/" + default_name;
    return args;
}

json record_to_json(const rfx::RunRecord& rec) {
    return {{"seed", rec.seed},
            {"N", rec.num_trajectories},
            {"T", rec.num_episodes},
            {"profile", rfx::profile_name(rec.profile)},
            {"setting", rfx::setting_name(rec.setting)},
            {"gap", rec.gap},
            {"per_reward_gaps", rec.per_reward_gaps},
            {"ratio_sig", rec.ratio_sig},
            {"mass_nonsig", rec.mass_nonsig},
            {"learner_reward", rec.learner_reward},
            {"G_bound", rec.cumulative_bound},
            {"penalty_mean", rec.penalty_mean},
            {"penalty_max", rec.penalty_max},
            {"wall_ms", rec.wall_ms}};
}

void emit(const GlobalArgs& args, const json& payload) {
    if (args.out.empty())
        std::cout << payload.dump(2) << "\n";
    else
        rfx::save_json_file(args.out, payload, 2);
}

int run_explore(const GlobalArgs& args, const std::string& trace_path) {
    const rfx::ExperimentConfig cfg = load_config(args);
    const rfx::TransitionKernel env = rfx::instantiate_mdp(cfg.source);
    rfx::ExplorationConfig xcfg = rfx::exploration_constants(
        env.spec, cfg.eps, cfg.delta, cfg.profile, cfg.multipliers, cfg.episode_cap);
    if (cfg.episodes_override > 0)
        xcfg.num_episodes = cfg.episodes_override;

    if (trace_path.empty()) {
        const rfx::ExplorationResult res = rfx::create_exploration_policy(env, xcfg, args.seed);
        emit(with_output(args, cfg, "exploration.json"),
             rfx::to_json(res.mixture, res.counts, res.diagnostics, xcfg));
        return 0;
    }
    // flag-gated per-episode trace requires driving the loop directly
    std::vector<rfx::EpisodeTrace> trace;
    std::vector<rfx::RewardFunction> lambdas;
    rfx::RewardStream stream = [&](int, const rfx::VisitCounts& counts) {
        lambdas.push_back(rfx::lambda_rewards(counts, xcfg.c));
        return lambdas.back();
    };
    const rfx::UcorepsResult run = rfx::ucoreps_run(
        env, stream, static_cast<int>(xcfg.num_episodes), xcfg.reward_bound,
        xcfg.cumulative_bound(env.spec), xcfg.ell0, args.seed, {}, &trace);
    std::ofstream tf(trace_path);
    if (!tf)
        throw rfx::config_error("cannot write trace file: " + trace_path);
    for (const rfx::EpisodeTrace& e : trace) {
        const json line = {{"t", e.episode},
                           {"constraint_residual", e.constraint_residual},
                           {"objective", e.objective},
                           {"regret_so_far", e.regret_so_far},
                           {"eta", e.eta}};
        tf << line.dump() << "\n";
    }
    rfx::MixturePolicy mix;
    mix.spec = env.spec;
    mix.components = run.policies;
    rfx::ExplorationDiagnostics diag;
    diag.cumulative_bound = xcfg.cumulative_bound(env.spec);
    diag.eta = run.eta;
    for (std::size_t t = 0; t < run.policies.size(); ++t)
        diag.learner_reward +=
            rfx::expected_return(rfx::occupancy_from_policy(env, run.policies[t]), lambdas[t]);
    emit(with_output(args, cfg, "exploration.json"), rfx::to_json(mix, run.counts, diag, xcfg));
    return 0;
}

int run_estimate(const GlobalArgs& args, const std::string& artifact_path,
                 const std::string& dataset_path) {
    const rfx::ExperimentConfig cfg = load_config(args);
    const rfx::TransitionKernel env = rfx::instantiate_mdp(cfg.source);
    const rfx::MixturePolicy mix =
        rfx::mixture_from_json(rfx::load_json_file(artifact_path));
    const double ell0 = rfx::log_factor(env.spec, cfg.delta, cfg.eps);
    std::int64_t n = cfg.trajectories_override;
    if (n <= 0)
        n = rfx::sample_budget(cfg.setting, env.spec, cfg.eps, cfg.delta, cfg.profile, 1.0,
                               cfg.budget_cap)
                .trajectories;
    const rfx::EstimationResult est = rfx::estimate_dynamics(env, mix, n, args.seed, ell0);
    if (!dataset_path.empty())
        rfx::save_text_file(dataset_path, rfx::dataset_to_jsonl(est.dataset));
    json out;
    out["kind"] = "model_artifact";
    out["model"] = rfx::to_json(est.model);
    out["counts"] = rfx::to_json(est.counts);
    out["policy_hash"] = est.dataset.policy_hash;
    emit(with_output(args, cfg, "model.json"), out);
    return 0;
}

int run_plan(const GlobalArgs& args, const std::string& model_path,
             const std::string& reward_path) {
    const rfx::ExperimentConfig cfg = load_config(args);
    const json artifact = rfx::load_json_file(model_path);
    if (artifact.value("kind", "") != "model_artifact")
        throw rfx::config_error("plan: expected a model artifact");
    const rfx::EmpiricalModel model = rfx::model_from_json(artifact.at("model"));
    const rfx::VisitCounts counts = rfx::counts_from_json(artifact.at("counts"));
    const rfx::RewardFunction reward = rfx::reward_from_json(rfx::load_json_file(reward_path));
    rfx::PenaltyKind kind;
    kind.setting = cfg.setting;
    kind.constant = cfg.default_penalty_constant();
    kind.class_size = cfg.setting == rfx::ExplorationSetting::reward_agnostic
                          ? std::max<std::int64_t>(1, cfg.reward_class_files.size())
                          : 1;
    emit(with_output(args, cfg, "plan.json"),
         rfx::to_json(rfx::pessimistic_plan(reward, model, counts, kind)));
    return 0;
}

int run_pipeline_cmd(const GlobalArgs& args) {
    const rfx::ExperimentConfig cfg = load_config(args);
    emit(with_output(args, cfg, "report.json"), record_to_json(rfx::run_pipeline(cfg, args.seed)));
    return 0;
}

int run_sweep(const GlobalArgs& args) {
    const rfx::ExperimentConfig cfg = load_config(args);
    const std::string csv = rfx::sweep(cfg);
    const GlobalArgs out_args = with_output(args, cfg, "sweep.csv");
    if (out_args.out.empty())
        std::cout << csv;
    else
        rfx::save_text_file(out_args.out, csv);
    return 0;
}

int run_hard_gen(const GlobalArgs& args, int n, int horizon, int hprime, int xprime,
                 const std::string& nu, int num_actions) {
    rfx::HardInstanceParams p;
    p.num_leaves = n;
    p.horizon = horizon;
    p.exit_step = hprime;
    p.target_leaf = xprime;
    p.num_actions = num_actions;
    p.nu = nu == "uniform" ? rfx::HardInstanceParams::nu_uniform(hprime, n, args.seed + 1)
                           : rfx::HardInstanceParams::nu_zero(hprime, n);
    const rfx::HardMdp mdp = rfx::build_hard_mdp(p, args.seed);
    const auto violations = rfx::verify_hard_instance(mdp);
    if (!violations.empty())
        throw rfx::config_error("hard-gen: generated instance failed verification");

    emit(args, rfx::to_json(mdp.kernel, &mdp.reward));
    if (!args.out.empty()) {
        json sidecar = {{"kind", "hard_instance_params"},
                        {"n", p.num_leaves},
                        {"H", p.horizon},
                        {"hprime", p.exit_step},
                        {"xprime", p.target_leaf},
                        {"num_actions", p.num_actions},
                        {"seed", args.seed},
                        {"nu", p.nu},
                        {"eps0", p.perturbation()},
                        {"optimal_exit_time", rfx::optimal_exit_time(mdp)}};
        rfx::save_json_file(args.out + ".params.json", sidecar, 2);
    }
    return 0;
}

int run_eval(const GlobalArgs& args, const std::string& mdp_path,
             const std::string& policy_path, const std::string& reward_path) {
    const json mdp_json = rfx::load_json_file(mdp_path);
    const rfx::TransitionKernel env = rfx::kernel_from_json(mdp_json);
    rfx::RewardFunction reward;
    if (!reward_path.empty())
        reward = rfx::reward_from_json(rfx::load_json_file(reward_path));
    else if (rfx::json_has_reward(mdp_json))
        reward = rfx::reward_from_mdp_json(mdp_json);
    else
        throw rfx::config_error("eval: no reward given and the MDP file carries none");

    const json pj = rfx::load_json_file(policy_path);
    rfx::MarkovPolicy policy;
    if (pj.value("kind", "") == "policy") {
        policy = rfx::policy_from_json(pj);
    } else if (pj.value("kind", "") == "plan") {
        const rfx::MdpSpec sp = rfx::spec_from_json(pj.at("spec"));
        policy = rfx::MarkovPolicy(sp);
        for (int h = 0; h < sp.horizon; ++h)
            for (int s = 0; s < sp.num_states; ++s)
                policy(h, s, pj.at("pihat").at(h).at(s).get<int>()) = 1.0;
    } else {
        throw rfx::config_error("eval: expected a policy or plan artifact");
    }
    const double gap = rfx::evaluate_suboptimality(policy, env, reward);
    emit(args, json{{"kind", "evaluation"}, {"gap", gap}});
    return 0;
}

int run_lemma_check(const GlobalArgs& args, int sequences) {
    const rfx::LemmaCheckReport report = rfx::lemma_checks(sequences, args.seed);
    json out = {{"kind", "lemma_check"},
                {"sequences_per_form", report.sequences_per_form},
                {"violations_form_one", report.violations_form_one},
                {"violations_form_two", report.violations_form_two},
                {"witnesses", report.witnesses}};
    emit(args, out);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"reward-free / reward-agnostic exploration harness"};
    app.require_subcommand(1);
    app.fallthrough(); // global flags are accepted after the subcommand

    GlobalArgs args;
    app.add_option("--config", args.config_path, "experiment config JSON");
    app.add_option("--seed", args.seed, "run seed");
    app.add_option("--out", args.out, "output path (stdout when omitted)");
    app.add_option("--profile", args.profile, "constant profile: theory | practical")
        ->check(CLI::IsMember({"theory", "practical", ""}));

    std::string trace_path, dump_mdp_path;
    app.add_option("--dump-mdp", dump_mdp_path,
                   "also write the instantiated MDP as JSON (the exchange format)");
    CLI::App* explore = app.add_subcommand("explore", "create the exploration policy");
    explore->add_option("--trace", trace_path, "per-episode trace JSONL (off by default)");

    std::string artifact_path, dataset_path;
    CLI::App* estimate = app.add_subcommand("estimate", "sample a dataset and fit the dynamics");
    estimate->add_option("--artifact", artifact_path, "exploration artifact JSON")->required();
    estimate->add_option("--dataset", dataset_path, "dataset JSONL output path");

    std::string model_path, reward_path;
    CLI::App* plan = app.add_subcommand("plan", "pessimistic planning on a model artifact");
    plan->add_option("--model", model_path, "model artifact JSON")->required();
    plan->add_option("--reward", reward_path, "reward JSON")->required();

    app.add_subcommand("pipeline", "full explore/estimate/plan/evaluate run");
    app.add_subcommand("sweep", "grid sweep to CSV");

    int hg_n = 2, hg_h = 8, hg_hprime = 1, hg_xprime = 1, hg_actions = 3;
    std::string hg_nu = "zero";
    CLI::App* hard = app.add_subcommand("hard-gen", "generate a lower-bound hard instance");
    hard->add_option("--n", hg_n, "leaf count (power of two)")->required();
    hard->add_option("--H", hg_h, "horizon")->required();
    hard->add_option("--hprime", hg_hprime, "target exit step")->required();
    hard->add_option("--xprime", hg_xprime, "target leaf (1-based)")->required();
    hard->add_option("--actions", hg_actions, "action count (>= 3)");
    hard->add_option("--nu", hg_nu, "absorbing rewards: zero | uniform")
        ->check(CLI::IsMember({"zero", "uniform"}));

    std::string eval_mdp, eval_policy, eval_reward;
    CLI::App* eval = app.add_subcommand("eval", "exact suboptimality of a policy or plan");
    eval->add_option("--mdp", eval_mdp, "MDP JSON")->required();
    eval->add_option("--policy", eval_policy, "policy or plan artifact JSON")->required();
    eval->add_option("--reward", eval_reward, "reward JSON (falls back to the MDP file)");

    int lemma_sequences = 1000;
    CLI::App* lemma = app.add_subcommand("lemma-check", "self-normalized-sum property batches");
    lemma->add_option("--sequences", lemma_sequences, "sequences per form");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return e.get_exit_code() == 0 ? 0 : 2;
    }

    try {
        if (!dump_mdp_path.empty()) {
            const rfx::ExperimentConfig cfg = load_config(args);
            rfx::save_json_file(dump_mdp_path, rfx::to_json(rfx::instantiate_mdp(cfg.source)));
        }
        if (app.got_subcommand(explore))
            return run_explore(args, trace_path);
        if (app.got_subcommand(estimate))
            return run_estimate(args, artifact_path, dataset_path);
        if (app.got_subcommand(plan))
            return run_plan(args, model_path, reward_path);
        if (app.got_subcommand("pipeline"))
            return run_pipeline_cmd(args);
        if (app.got_subcommand("sweep"))
            return run_sweep(args);
        if (app.got_subcommand(hard))
            return run_hard_gen(args, hg_n, hg_h, hg_hprime, hg_xprime, hg_nu, hg_actions);
        if (app.got_subcommand(eval))
            return run_eval(args, eval_mdp, eval_policy, eval_reward);
        if (app.got_subcommand(lemma))
            return run_lemma_check(args, lemma_sequences);
    } catch (const rfx::cap_exceeded_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const rfx::convergence_error& e) {
        std::cerr << "error: " << e.what() << " (residual " << e.constraint_residual << ")\n";
        return 3;
    } catch (const rfx::config_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const json::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
