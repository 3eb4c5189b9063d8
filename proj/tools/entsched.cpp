// Command-line front end: pre-information generation, episode batches,
// training, evaluation, parameter sweeps, Barrett-Kok characterization,
// and result statistics.

#include "entsched/common.hpp"
#include "entsched/harness.hpp"
#include "entsched/qmcs/bk.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <map>
#include <iostream>
#include <sstream>

namespace {

using namespace entsched;

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot write " + path);
    out << content;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::vector<double> parse_values(const std::string& csv) {
    std::vector<double> values;
    std::istringstream in(csv);
    std::string item;
    while (std::getline(in, item, ','))
        if (!item.empty())
            values.push_back(std::stod(item));
    return values;
}

std::vector<StrategyKind> parse_strategies(const std::string& csv) {
    std::vector<StrategyKind> kinds;
    std::istringstream in(csv);
    std::string item;
    while (std::getline(in, item, ',')) {
        if (item.empty())
            continue;
        auto kind = strategy_from_name(item);
        if (!kind)
            throw ConfigError("unknown strategy: " + item);
        kinds.push_back(*kind);
    }
    return kinds;
}

qmcs::BKConfig bk_config_from(const ConfigFile& cfg) {
    qmcs::BKConfig bk;
    auto fill = [&](qmcs::NodeParams& dst, const std::string& s) {
        dst.g = cfg.get_double("qmcs", "g" + s, dst.g);
        dst.kappa = cfg.get_double("qmcs", "kappa" + s, dst.kappa);
        dst.k_det = cfg.get_double("qmcs", "k_det" + s, dst.k_det);
        dst.gamma = cfg.get_double("qmcs", "gamma" + s, dst.gamma);
        dst.chi = cfg.get_double("qmcs", "chi" + s, dst.chi);
        dst.k_dep = cfg.get_double("qmcs", "k_dep" + s, dst.k_dep);
        dst.delta_c = cfg.get_double("qmcs", "delta_c" + s, dst.delta_c);
        dst.delta_down = cfg.get_double("qmcs", "delta_down" + s, dst.delta_down);
    };
    // unsuffixed keys set both nodes, _a/_b keys override per node
    fill(bk.params.node_a, "");
    bk.params.node_b = bk.params.node_a;
    fill(bk.params.node_a, "_a");
    fill(bk.params.node_b, "_b");
    bk.optical_tau = cfg.get_double("qmcs", "optical_tau", bk.optical_tau);
    bk.mw_tau = cfg.get_double("qmcs", "mw_tau", bk.mw_tau);
    bk.t_wait = cfg.get_double("qmcs", "t_wait", bk.t_wait);
    bk.t_relax = cfg.get_double("qmcs", "t_relax", bk.t_relax);
    bk.n_traj = cfg.get_long("qmcs", "n_traj", bk.n_traj);
    bk.n_traj2 = cfg.get_long("qmcs", "n_traj2", bk.n_traj2);
    bk.t_mem_steps = cfg.get_double("qmcs", "t_mem_steps", bk.t_mem_steps);
    bk.dt = cfg.get_double("qmcs", "dt", bk.dt);
    bk.rng_seed = cfg.get_u64("qmcs", "rng_seed", bk.rng_seed);
    bk.reuse_jump_draw = cfg.get_bool("qmcs", "reuse_jump_draw", bk.reuse_jump_draw);
    return bk;
}

int run(int argc, char** argv) {
    CLI::App app{"inhomogeneous entanglement scheduling simulator"};
    app.require_subcommand(1);

    std::string config_path, out_path, ckpt_path, in_path, summary_path;
    std::string strategy_name_arg = "greedy", axis_arg = "sigma_f";
    std::string values_arg, strategies_arg = "random,greedy", pairs_arg;
    int episodes = 100;
    std::uint64_t seed = 1;
    double hist_upper = 0.0;

    std::string from_qmcs_path;
    auto* gen = app.add_subcommand("gen-preinfo", "sample per-pair fidelity/rate matrices");
    gen->add_option("--config", config_path, "config file");
    gen->add_option("--out", out_path, "output csv")->required();
    gen->add_option("--seed", seed, "override [gen] rng_seed");
    gen->add_option("--from-qmcs", from_qmcs_path,
                    "characterized pairs csv (i,j,F,R,C,branch); unlisted pairs are sampled");

    auto* sim = app.add_subcommand("simulate", "run an episode batch for one strategy");
    sim->add_option("--config", config_path, "config file");
    sim->add_option("--strategy", strategy_name_arg,
                    "random|mst|greedy|fc|transformer|transformer-qubit");
    sim->add_option("--episodes", episodes, "episode count");
    sim->add_option("--seed", seed, "batch base seed");
    sim->add_option("--ckpt", ckpt_path, "checkpoint for learned strategies");
    sim->add_option("--out", out_path, "results csv")->required();
    sim->add_option("--summary", summary_path, "summary json");
    std::string trajectory_path, progress_path;
    sim->add_option("--trajectory-out", trajectory_path, "episode-0 trajectory csv");
    sim->add_option("--progress-out", progress_path, "episode-0 progress table csv");

    auto* train_cmd = app.add_subcommand("train", "train a model in the environment");
    train_cmd->add_option("--config", config_path, "config file")->required();
    train_cmd->add_option("--out", ckpt_path, "output checkpoint")->required();
    train_cmd->add_option("--history", out_path, "per-epoch mu/loss csv");

    auto* eval = app.add_subcommand("evaluate", "evaluate a checkpoint");
    eval->add_option("--ckpt", ckpt_path, "checkpoint")->required();
    eval->add_option("--config", config_path, "config file");
    eval->add_option("--episodes", episodes, "episode count");
    eval->add_option("--seed", seed, "batch base seed");
    eval->add_option("--out", out_path, "results csv")->required();
    eval->add_option("--summary", summary_path, "summary json");

    auto* sweep = app.add_subcommand("sweep", "cross-product of axis values and strategies");
    sweep->add_option("--config", config_path, "config file");
    sweep->add_option("--axis", axis_arg, "sigma_f|n_qubits");
    sweep->add_option("--values", values_arg, "comma-separated axis values")->required();
    sweep->add_option("--strategies", strategies_arg, "comma-separated strategies");
    sweep->add_option("--episodes", episodes, "episodes per cell");
    sweep->add_option("--seed", seed, "sweep base seed");
    sweep->add_option("--ckpt", ckpt_path, "checkpoint for learned strategies");
    sweep->add_option("--out", out_path, "sweep csv")->required();

    auto* qmcs_cmd = app.add_subcommand("qmcs", "Barrett-Kok per-pair characterization");
    qmcs_cmd->add_option("--config", config_path, "config file ([qmcs] section)");
    qmcs_cmd->add_option("--pairs", pairs_arg, "semicolon list, e.g. 0-1;2-3")->required();
    qmcs_cmd->add_option("--out", out_path, "per-pair csv")->required();

    auto* stats = app.add_subcommand("stats", "summarize a results csv");
    stats->add_option("--in", in_path, "results csv")->required();
    stats->add_option("--hist-upper", hist_upper, "histogram upper bound");
    stats->add_option("--out", out_path, "summary json (stdout if omitted)");

    CLI11_PARSE(app, argc, argv);

    ConfigFile cfg =
        config_path.empty() ? ConfigFile::parse_string("") : ConfigFile::parse_file(config_path);

    if (gen->parsed()) {
        GenParams params = cfg.gen_params();
        if (gen->count("--seed"))
            params.rng_seed = seed;
        const SimConfig sim_cfg = cfg.sim_config();
        if (from_qmcs_path.empty()) {
            save_preinfo(generate_preinfo(params, sim_cfg.n_qubits), out_path);
            return 0;
        }
        // characterized pairs override the sampled fill
        std::map<std::pair<int, int>, qmcs::BKResult> results;
        std::istringstream in(read_file(from_qmcs_path));
        std::string line;
        if (!std::getline(in, line) || line != "i,j,F,R,C,branch")
            throw IoError(from_qmcs_path + ": expected header i,j,F,R,C,branch");
        while (std::getline(in, line)) {
            if (line.empty())
                continue;
            std::istringstream ls(line);
            int i, j, branch;
            double f, r, c;
            char comma;
            if (!(ls >> i >> comma >> j >> comma >> f >> comma >> r >> comma >> c >> comma >>
                  branch))
                throw IoError(from_qmcs_path + ": malformed row '" + line + "'");
            qmcs::BKResult result;
            result.chosen_branch = 0;
            result.branch_fidelities[0] = f;
            result.branch_rates[0] = r;
            result.cost = c;
            results[{i, j}] = result;
        }
        save_preinfo(preinfo_from_qmcs(results, sim_cfg.n_qubits, params), out_path);
        return 0;
    }

    if (sim->parsed() || eval->parsed()) {
        BatchSpec spec;
        spec.sim = cfg.sim_config();
        spec.gen = cfg.gen_params();
        spec.strategy = cfg.strategy_config();
        spec.base_seed = seed;
        spec.n_episodes = episodes;
        spec.mixing_weight = cfg.train_config().mixing_weight;
        if (sim->parsed()) {
            auto kind = strategy_from_name(strategy_name_arg);
            if (!kind)
                throw ConfigError("unknown strategy: " + strategy_name_arg);
            spec.strategy.kind = *kind;
        } else {
            spec.strategy.kind = StrategyKind::TransformerQuPairs;
        }
        std::unique_ptr<Agent> agent;
        if (!ckpt_path.empty()) {
            agent = make_agent(Checkpoint::load(ckpt_path));
            if (eval->parsed() || spec.strategy.kind == StrategyKind::Fc)
                spec.strategy.kind = agent->variant() == ModelVariant::Fc
                                         ? StrategyKind::Fc
                                         : (agent->variant() == ModelVariant::Qubit
                                                ? StrategyKind::TransformerQubit
                                                : StrategyKind::TransformerQuPairs);
            spec.agent = agent.get();
        }
        const auto results = run_batch(spec);
        write_file(out_path, results_csv(results));
        if (!summary_path.empty()) {
            const double upper = spec.sim.n_qubits * spec.sim.stop_fraction;
            write_file(summary_path, summary_json(summarize(results, upper)));
        }
        if (!trajectory_path.empty() || !progress_path.empty()) {
            // re-run episode 0 with its batch-derived seeds and dump its traces
            GenParams ep_gen = spec.gen;
            ep_gen.rng_seed = derive_seed(spec.base_seed, StreamTag::Preinfo, 0);
            SimConfig ep_sim = spec.sim;
            ep_sim.rng_seed = derive_seed(spec.base_seed, StreamTag::Env, 0);
            const auto outcome =
                run_episode(ep_sim, generate_preinfo(ep_gen, ep_sim.n_qubits), spec.strategy,
                            spec.agent, spec.mixing_weight);
            if (!trajectory_path.empty())
                write_file(trajectory_path, trajectory_csv(outcome.trajectory));
            if (!progress_path.empty())
                write_file(progress_path, progress_csv(outcome.progress));
        }
        return 0;
    }

    if (train_cmd->parsed()) {
        const SimConfig sim_cfg = cfg.sim_config();
        const GenParams gen_cfg = cfg.gen_params();
        StrategyConfig strat = cfg.strategy_config();
        const TrainConfig tc = cfg.train_config();
        const ModelConfig mc = cfg.model_config();
        // the rollout policy follows the model variant being trained
        switch (mc.variant) {
        case ModelVariant::Fc: strat.kind = StrategyKind::Fc; break;
        case ModelVariant::Qubit: strat.kind = StrategyKind::TransformerQubit; break;
        case ModelVariant::QuPairs: strat.kind = StrategyKind::TransformerQuPairs; break;
        }
        const RolloutFn rollout =
            make_rollout_fn(sim_cfg, gen_cfg, strat, tc);
        TrainResult result;
        if (mc.variant == ModelVariant::Fc) {
            ModelConfig fc_cfg = mc;
            if (fc_cfg.fc_n_qubits == 0)
                fc_cfg.fc_n_qubits = sim_cfg.n_qubits;
            FcNet<float> model(fc_cfg);
            model.init_weights(tc.rng_seed);
            result = train(model, rollout, make_eval_fn(sim_cfg, gen_cfg, strat, tc), tc);
        } else {
            Transformer<float> model(mc);
            model.init_weights(tc.rng_seed);
            result = train(model, rollout, make_eval_fn(sim_cfg, gen_cfg, strat, tc), tc);
        }
        result.best.save(ckpt_path);
        if (!out_path.empty()) {
            std::ostringstream hist;
            hist << "epoch,mean_mu,loss\n";
            for (std::size_t e = 0; e < result.history.size(); ++e)
                hist << e << ',' << result.history[e].mean_mu << ',' << result.history[e].loss
                     << '\n';
            write_file(out_path, hist.str());
        }
        std::cout << "best running-average mu: " << result.best_running_mu << "\n";
        return 0;
    }

    if (sweep->parsed()) {
        SweepSpec spec;
        spec.sim = cfg.sim_config();
        spec.gen = cfg.gen_params();
        spec.strategy_template = cfg.strategy_config();
        spec.strategies = parse_strategies(strategies_arg);
        spec.values = parse_values(values_arg);
        spec.base_seed = seed;
        spec.episodes = episodes;
        spec.mixing_weight = cfg.train_config().mixing_weight;
        if (axis_arg == "sigma_f")
            spec.axis = SweepAxis::SigmaFidelity;
        else if (axis_arg == "n_qubits")
            spec.axis = SweepAxis::NQubits;
        else
            throw ConfigError("unknown sweep axis: " + axis_arg);
        std::unique_ptr<Agent> agent;
        if (!ckpt_path.empty()) {
            agent = make_agent(Checkpoint::load(ckpt_path));
            spec.agent = agent.get();
        }
        write_file(out_path, sweep_csv(run_sweep(spec)));
        return 0;
    }

    if (qmcs_cmd->parsed()) {
        const qmcs::BKConfig base = bk_config_from(cfg);
        std::ostringstream out;
        out << "i,j,F,R,C,branch\n";
        std::istringstream pairs(pairs_arg);
        std::string pair;
        while (std::getline(pairs, pair, ';')) {
            if (pair.empty())
                continue;
            const auto dash = pair.find('-');
            if (dash == std::string::npos)
                throw ConfigError("bad pair '" + pair + "', expected i-j");
            const int i = std::stoi(pair.substr(0, dash));
            const int j = std::stoi(pair.substr(dash + 1));
            qmcs::BKConfig bk = base;
            bk.rng_seed = derive_seed(base.rng_seed, StreamTag::General,
                                      static_cast<std::uint64_t>(i) * 100003 + j);
            const qmcs::BKResult r = run_bk(bk);
            char buf[160];
            std::snprintf(buf, sizeof(buf), "%d,%d,%.17g,%.17g,%.17g,%d", i, j,
                          r.chosen_fidelity(), r.chosen_rate(), r.cost, r.chosen_branch + 1);
            out << buf << '\n';
        }
        write_file(out_path, out.str());
        return 0;
    }

    if (stats->parsed()) {
        const auto results = parse_results_csv(read_file(in_path));
        if (hist_upper <= 0.0 && !results.empty())
            hist_upper = 0.75 * results.front().n_qubits;
        const std::string json = summary_json(summarize(results, hist_upper));
        if (out_path.empty())
            std::cout << json;
        else
            write_file(out_path, json);
        return 0;
    }

    return 1;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
