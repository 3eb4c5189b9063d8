#include "entsched/harness.hpp"

#include "entsched/common.hpp"
#include "entsched/schedulers.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>
#include <thread>

namespace entsched {

namespace {

bool any_pair(const std::vector<Action>& actions) {
    return std::any_of(actions.begin(), actions.end(),
                       [](const Action& a) { return a.is_pair(); });
}

int pair_count(const std::vector<Action>& actions) {
    return static_cast<int>(
        std::count_if(actions.begin(), actions.end(), [](const Action& a) { return a.is_pair(); }));
}

/// One scheduling event: assign pairs until workers fill up or nothing
/// under the threshold remains.
void schedule(Env& env, const PreInfo& preinfo, const StrategyConfig& strategy,
              const std::vector<PlanEdge>& plan, const Agent* agent, double mixing_weight,
              Rng& strategy_rng) {
    const double t_mem = env.config().t_mem_steps;
    while (!env.scheduling_complete()) {
        if (strategy.kind == StrategyKind::TransformerQubit) {
            if (!agent)
                throw ConfigError("transformer-qubit strategy needs an agent");
            Action action = qubit_level_select(*agent, env, preinfo, t_mem, mixing_weight,
                                               strategy.action_threshold);
            if (!action.is_pair())
                return;
            env.assign_actions({action});
            continue;
        }

        ActionMatrix matrix;
        switch (strategy.kind) {
        case StrategyKind::Random:
            matrix = random_matrix(env, strategy_rng, strategy.action_threshold);
            break;
        case StrategyKind::Greedy:
            matrix = greedy_matrix(env, preinfo, t_mem);
            break;
        case StrategyKind::StaticMst:
            matrix = mst_matrix(plan, env);
            break;
        case StrategyKind::Fc:
        case StrategyKind::TransformerQuPairs: {
            if (!agent)
                throw ConfigError("learned strategy needs an agent");
            const Eigen::VectorXd preds = agent->predict(encode_tokens(env, preinfo, t_mem));
            matrix = action_matrix_from_predictions(preds, env, preinfo, t_mem, mixing_weight);
            break;
        }
        default:
            throw ConfigError("unhandled strategy kind");
        }

        std::vector<Action> actions = select_actions(matrix, env, strategy);
        if (!any_pair(actions))
            return;
        const int slots = env.config().max_workers - static_cast<int>(env.workers().size());
        const int assigned = pair_count(actions);
        env.assign_actions(actions);
        if (assigned < slots)
            return; // selection exhausted the below-threshold candidates
    }
}

} // namespace

EpisodeOutcome run_episode(const SimConfig& sim, const PreInfo& preinfo,
                           const StrategyConfig& strategy, const Agent* agent,
                           double mixing_weight) {
    const auto t_start = std::chrono::steady_clock::now();
    strategy.validate();

    Env env(sim, preinfo);
    const double t_mem = env.config().t_mem_steps;
    std::vector<PlanEdge> plan;
    if (strategy.kind == StrategyKind::StaticMst)
        plan = mst_plan(preinfo, t_mem);
    Rng strategy_rng = Rng::derived(env.config().rng_seed, StreamTag::Strategy, 0);

    std::vector<TrajectoryPoint> trajectory;
    trajectory.push_back({0, env.largest_component_size(), 0.0,
                          mu(env.largest_component_size(), 0.0)});
    Env peak_env = env;
    double peak = trajectory.back().mu;

    schedule(env, preinfo, strategy, plan, agent, mixing_weight, strategy_rng);
    while (true) {
        const auto events = env.step();
        const double epsilon = cluster_error(env, t_mem);
        const int n_max = env.largest_component_size();
        const double mu_now = mu(n_max, epsilon);
        trajectory.push_back({env.step_count(), n_max, epsilon, mu_now});
        if (mu_now > peak) {
            peak = mu_now;
            peak_env = env;
        }
        if (env.is_terminal())
            break;
        if (!events.empty() && env.enough_idle_qubits())
            schedule(env, preinfo, strategy, plan, agent, mixing_weight, strategy_rng);
    }

    const MuPeak best = peak_mu(trajectory);
    EpisodeOutcome outcome{EpisodeResult{}, std::move(trajectory), std::move(peak_env),
                           env.progress()};
    outcome.result.seed = sim.rng_seed;
    outcome.result.strategy = strategy.kind;
    outcome.result.n_qubits = env.config().n_qubits;
    outcome.result.mu_peak = best.mu_star;
    outcome.result.step_at_peak = best.step_star;
    outcome.result.n_max_final = env.largest_component_size();
    outcome.result.truncated =
        !(static_cast<double>(env.largest_component_size()) >
          env.config().stop_fraction * env.config().n_qubits);
    outcome.result.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return outcome;
}

std::vector<EpisodeResult> run_batch(const BatchSpec& spec) {
    if (spec.n_episodes < 1)
        throw ConfigError("run_batch: n_episodes must be >= 1");
    std::vector<EpisodeResult> results(spec.n_episodes);

    auto run_one = [&](int k) {
        GenParams gen = spec.gen;
        gen.rng_seed = derive_seed(spec.base_seed, StreamTag::Preinfo, k);
        SimConfig sim = spec.sim;
        sim.rng_seed = derive_seed(spec.base_seed, StreamTag::Env, k);
        const PreInfo preinfo = generate_preinfo(gen, sim.n_qubits);
        EpisodeOutcome outcome =
            run_episode(sim, preinfo, spec.strategy, spec.agent, spec.mixing_weight);
        outcome.result.sigma_fidelity = gen.sigma_fidelity;
        results[k] = outcome.result;
    };

    const int workers = std::min(thread_budget(), spec.n_episodes);
    if (workers <= 1) {
        for (int k = 0; k < spec.n_episodes; ++k)
            run_one(k);
    } else {
        std::atomic<int> next{0};
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&]() {
                for (int k = next.fetch_add(1); k < spec.n_episodes; k = next.fetch_add(1))
                    run_one(k);
            });
        for (auto& t : pool)
            t.join();
    }
    return results;
}

StatsSummary summarize(const std::vector<EpisodeResult>& results, double hist_upper) {
    if (results.size() < 2)
        throw ConfigError("summarize: need at least 2 results");
    if (!(hist_upper > 0.0))
        throw ConfigError("summarize: hist_upper must be positive");
    StatsSummary s;
    s.n = static_cast<int>(results.size());
    double sum = 0.0;
    for (const auto& r : results)
        sum += r.mu_peak;
    s.mean_mu = sum / s.n;
    double ss = 0.0;
    for (const auto& r : results)
        ss += (r.mu_peak - s.mean_mu) * (r.mu_peak - s.mean_mu);
    const double sample_std = std::sqrt(ss / (s.n - 1));
    s.sigma_mu = sample_std / std::sqrt(static_cast<double>(s.n));
    s.two_sigma_halfwidth = 2.0 * s.sigma_mu;
    s.fit_mean = s.mean_mu;
    s.fit_std = sample_std;
    s.degenerate_fit = (sample_std == 0.0);

    constexpr int kBins = 30;
    s.bin_edges.resize(kBins + 1);
    for (int b = 0; b <= kBins; ++b)
        s.bin_edges[b] = hist_upper * b / kBins;
    s.counts.assign(kBins, 0);
    for (const auto& r : results) {
        int b = static_cast<int>(std::floor(r.mu_peak / hist_upper * kBins));
        b = std::clamp(b, 0, kBins - 1); // clamp outliers into the edge bins
        ++s.counts[b];
    }
    s.cdf.resize(kBins);
    long running = 0;
    for (int b = 0; b < kBins; ++b) {
        running += s.counts[b];
        s.cdf[b] = static_cast<double>(running) / s.n;
    }
    return s;
}

StrategyDelta compare_strategies(const StatsSummary& a, const StatsSummary& b) {
    StrategyDelta d;
    d.delta_mu_bar = b.mean_mu - a.mean_mu;
    d.two_pow_delta = std::exp2(d.delta_mu_bar);
    return d;
}

PairedComparison paired_compare(const std::vector<EpisodeResult>& a,
                                const std::vector<EpisodeResult>& b) {
    if (a.size() != b.size() || a.size() < 2)
        throw ConfigError("paired_compare: need two equally sized batches (>= 2 episodes)");
    PairedComparison p;
    p.n = static_cast<int>(a.size());
    double sum = 0.0;
    for (int k = 0; k < p.n; ++k)
        sum += b[k].mu_peak - a[k].mu_peak;
    p.delta_mu_bar = sum / p.n;
    double ss = 0.0;
    for (int k = 0; k < p.n; ++k) {
        const double d = (b[k].mu_peak - a[k].mu_peak) - p.delta_mu_bar;
        ss += d * d;
    }
    p.sigma_delta = std::sqrt(ss / (p.n - 1));
    p.t_statistic = p.sigma_delta > 0.0
                        ? p.delta_mu_bar / (p.sigma_delta / std::sqrt(static_cast<double>(p.n)))
                        : (p.delta_mu_bar > 0.0 ? std::numeric_limits<double>::infinity()
                                                : 0.0);
    p.two_pow_delta = std::exp2(p.delta_mu_bar);
    return p;
}

std::vector<SweepRow> run_sweep(const SweepSpec& spec) {
    if (spec.values.empty())
        throw ConfigError("run_sweep: empty value list");
    if (spec.strategies.empty())
        throw ConfigError("run_sweep: empty strategy list");
    if (spec.axis == SweepAxis::NQubits) {
        for (StrategyKind k : spec.strategies)
            if (k == StrategyKind::Fc)
                throw ConfigError("fc cannot run an n_qubits sweep: fixed input size does "
                                  "not transfer across qubit counts");
    }

    std::vector<SweepRow> rows;
    for (const double value : spec.values) {
        for (StrategyKind kind : spec.strategies) {
            BatchSpec batch;
            batch.sim = spec.sim;
            batch.gen = spec.gen;
            batch.strategy = spec.strategy_template;
            batch.strategy.kind = kind;
            batch.agent = spec.agent;
            batch.mixing_weight = spec.mixing_weight;
            // every cell shares episode seeds: comparisons across strategies
            // and axis values are paired on common environment draws
            batch.base_seed = spec.base_seed;
            batch.n_episodes = spec.episodes;
            if (spec.axis == SweepAxis::SigmaFidelity) {
                batch.gen.sigma_fidelity = value;
            } else {
                batch.sim.n_qubits = static_cast<int>(value);
                if (spec.scale_workers_with_n)
                    batch.sim.max_workers = 0; // re-derive N/2 per size
                else if (batch.sim.max_workers > static_cast<int>(value) / 2)
                    throw ConfigError("n_qubits sweep: fixed max_workers " +
                                      std::to_string(batch.sim.max_workers) +
                                      " exceeds n/2 for n = " + std::to_string((int)value));
            }

            auto results = run_batch(batch);
            const double upper = batch.sim.n_qubits * batch.sim.stop_fraction;
            rows.push_back({spec.axis, value, kind, summarize(results, upper)});
        }
    }
    return rows;
}

std::string results_csv(const std::vector<EpisodeResult>& results) {
    std::ostringstream out;
    out << "seed,strategy,n_qubits,sigma_f,mu_peak,step_at_peak,n_max_final,wall_time_s\n";
    char buf[256];
    for (const auto& r : results) {
        std::snprintf(buf, sizeof(buf), "%llu,%s,%d,%.17g,%.17g,%ld,%d,%.6f",
                      static_cast<unsigned long long>(r.seed), strategy_name(r.strategy),
                      r.n_qubits, r.sigma_fidelity, r.mu_peak, r.step_at_peak, r.n_max_final,
                      r.wall_time_s);
        out << buf << '\n';
    }
    return out.str();
}

std::vector<EpisodeResult> parse_results_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) ||
        line != "seed,strategy,n_qubits,sigma_f,mu_peak,step_at_peak,n_max_final,wall_time_s")
        throw IoError("results csv: unexpected header");
    std::vector<EpisodeResult> results;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        std::istringstream ls(line);
        std::string field;
        EpisodeResult r;
        auto next = [&]() {
            if (!std::getline(ls, field, ','))
                throw IoError("results csv: short row '" + line + "'");
            return field;
        };
        r.seed = std::stoull(next());
        auto kind = strategy_from_name(next());
        if (!kind)
            throw IoError("results csv: unknown strategy '" + field + "'");
        r.strategy = *kind;
        r.n_qubits = std::stoi(next());
        r.sigma_fidelity = std::stod(next());
        r.mu_peak = std::stod(next());
        r.step_at_peak = std::stol(next());
        r.n_max_final = std::stoi(next());
        r.wall_time_s = std::stod(next());
        results.push_back(r);
    }
    return results;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::ostringstream out;
    out << "axis,value,strategy,n_episodes,mean_mu,sigma_mu,two_sigma_halfwidth\n";
    char buf[256];
    for (const auto& row : rows) {
        std::snprintf(buf, sizeof(buf), "%s,%.17g,%s,%d,%.17g,%.17g,%.17g",
                      row.axis == SweepAxis::SigmaFidelity ? "sigma_f" : "n_qubits", row.value,
                      strategy_name(row.strategy), row.stats.n, row.stats.mean_mu,
                      row.stats.sigma_mu, row.stats.two_sigma_halfwidth);
        out << buf << '\n';
    }
    return out.str();
}

std::string summary_json(const StatsSummary& s) {
    std::ostringstream out;
    char buf[64];
    auto num = [&](double x) {
        std::snprintf(buf, sizeof(buf), "%.17g", x);
        return std::string(buf);
    };
    out << "{\n";
    out << "  \"n\": " << s.n << ",\n";
    out << "  \"mean_mu\": " << num(s.mean_mu) << ",\n";
    out << "  \"sigma_mu\": " << num(s.sigma_mu) << ",\n";
    out << "  \"two_sigma_halfwidth\": " << num(s.two_sigma_halfwidth) << ",\n";
    out << "  \"gaussian_fit\": {\"mean\": " << num(s.fit_mean) << ", \"std\": " << num(s.fit_std)
        << ", \"degenerate\": " << (s.degenerate_fit ? "true" : "false") << "},\n";
    out << "  \"bin_edges\": [";
    for (std::size_t i = 0; i < s.bin_edges.size(); ++i)
        out << (i ? ", " : "") << num(s.bin_edges[i]);
    out << "],\n  \"counts\": [";
    for (std::size_t i = 0; i < s.counts.size(); ++i)
        out << (i ? ", " : "") << s.counts[i];
    out << "],\n  \"cdf\": [";
    for (std::size_t i = 0; i < s.cdf.size(); ++i)
        out << (i ? ", " : "") << num(s.cdf[i]);
    out << "]\n}\n";
    return out.str();
}

EvalFn make_eval_fn(const SimConfig& sim_template, const GenParams& gen_template,
                    const StrategyConfig& strategy, const TrainConfig& train) {
    return [=](const Agent& agent, int episode) -> double {
        const std::uint64_t ep_seed =
            derive_seed(train.rng_seed, StreamTag::Validate, static_cast<std::uint64_t>(episode));
        GenParams gen = gen_template;
        gen.rng_seed = derive_seed(ep_seed, StreamTag::Preinfo, 0);
        SimConfig sim = sim_template;
        sim.rng_seed = derive_seed(ep_seed, StreamTag::Env, 0);
        const PreInfo preinfo = generate_preinfo(gen, sim.n_qubits);
        return run_episode(sim, preinfo, strategy, &agent, train.mixing_weight).result.mu_peak;
    };
}

namespace {

/// Injects exploration noise into predictions and records the states the
/// policy was queried at.
class ExploringAgent : public Agent {
public:
    ExploringAgent(const Agent& inner, const Eigen::VectorXd* noise,
                   std::vector<Eigen::MatrixXd>* log)
        : inner_(inner), noise_(noise), log_(log) {}
    ModelVariant variant() const override { return inner_.variant(); }
    Eigen::VectorXd predict(const Eigen::MatrixXd& tokens) const override {
        Eigen::VectorXd pred = inner_.predict(tokens);
        if (log_)
            log_->push_back(tokens);
        if (noise_ && noise_->size() == pred.size())
            pred += *noise_;
        return pred;
    }

private:
    const Agent& inner_;
    const Eigen::VectorXd* noise_;
    std::vector<Eigen::MatrixXd>* log_;
};

constexpr int kMaxEventGrads = 4; // reward-gradient states kept per episode

} // namespace

RolloutFn make_rollout_fn(const SimConfig& sim_template, const GenParams& gen_template,
                          const StrategyConfig& strategy, const TrainConfig& train) {
    return [=](const Agent& agent, int epoch, int episode) -> TrainingRollout {
        // antithetic pairing: consecutive episodes share environment and
        // pre-information seeds and explore with opposite noise signs
        const std::uint64_t pair_index = static_cast<std::uint64_t>(episode / 2);
        const double sign = (episode % 2 == 0) ? 1.0 : -1.0;
        const std::uint64_t index =
            (static_cast<std::uint64_t>(epoch) << 20) | pair_index;
        const std::uint64_t ep_seed = derive_seed(train.rng_seed, StreamTag::TrainEpisode, index);

        GenParams gen = gen_template;
        gen.rng_seed = derive_seed(ep_seed, StreamTag::Preinfo, 0);
        SimConfig sim = sim_template;
        sim.rng_seed = derive_seed(ep_seed, StreamTag::Env, 0);
        const PreInfo preinfo = generate_preinfo(gen, sim.n_qubits);

        TrainingRollout rollout;
        // exploration applies to the pair-level prediction field only
        const bool explore = train.explore_sigma > 0.0 &&
                             strategy.kind != StrategyKind::TransformerQubit;
        std::vector<Eigen::MatrixXd> event_log;
        if (explore) {
            Rng noise_rng = Rng::derived(ep_seed, StreamTag::Explore, 0);
            const long tokens = static_cast<long>(sim.n_qubits) * sim.n_qubits;
            rollout.noise.resize(tokens);
            for (long t = 0; t < tokens; ++t)
                rollout.noise(t) = sign * noise_rng.gaussian(0.0, train.explore_sigma);
        }
        ExploringAgent wrapper(agent, explore ? &rollout.noise : nullptr,
                               explore ? &event_log : nullptr);

        EpisodeOutcome outcome =
            run_episode(sim, preinfo, strategy, &wrapper, train.mixing_weight);
        rollout.mu_peak = outcome.result.mu_peak;

        rollout.total_events = static_cast<long>(event_log.size());
        if (!event_log.empty()) {
            Rng pick = Rng::derived(ep_seed, StreamTag::Explore, 1);
            if (rollout.total_events <= kMaxEventGrads) {
                rollout.event_tokens = std::move(event_log);
            } else {
                // uniform subsample without replacement
                std::vector<long> order(event_log.size());
                std::iota(order.begin(), order.end(), 0);
                for (int k = 0; k < kMaxEventGrads; ++k) {
                    const long j = k + static_cast<long>(pick.below(order.size() - k));
                    std::swap(order[k], order[j]);
                    rollout.event_tokens.push_back(std::move(event_log[order[k]]));
                }
            }
        }

        const Env& peak = outcome.peak_env;
        const double t_mem = peak.config().t_mem_steps;
        const int n = peak.config().n_qubits;

        RolloutSample<float>& sample = rollout.sample;
        sample.mu_peak = outcome.result.mu_peak;

        const auto component = peak.largest_component();
        std::vector<std::uint8_t> in_component(n, 0);
        for (int q : component.members)
            in_component[q] = 1;

        if (strategy.kind == StrategyKind::TransformerQubit) {
            sample.tokens = encode_qubit_tokens(peak, preinfo, t_mem, -1).cast<float>();
            sample.targets = Vec<float>::Zero(n);
            sample.mask.assign(n, 0);
            std::vector<double> err_sum(n, 0.0);
            std::vector<int> err_count(n, 0);
            for (const auto& e : peak.progress()) {
                if (!in_component[e.qubit_i] || !in_component[e.qubit_j])
                    continue;
                const double err =
                    link_error(preinfo.fidelity(e.qubit_i, e.qubit_j),
                               static_cast<double>(peak.step_count() - e.success_step), t_mem);
                err_sum[e.qubit_i] += err;
                err_sum[e.qubit_j] += err;
                ++err_count[e.qubit_i];
                ++err_count[e.qubit_j];
            }
            for (int q = 0; q < n; ++q) {
                if (err_count[q] == 0)
                    continue;
                sample.targets(q) = static_cast<float>(err_sum[q] / err_count[q]);
                sample.mask[q] = 1;
            }
            return rollout;
        }

        sample.tokens = encode_tokens(peak, preinfo, t_mem).cast<float>();
        sample.targets = Vec<float>::Zero(static_cast<long>(n) * n);
        sample.mask.assign(static_cast<std::size_t>(n) * n, 0);
        for (const auto& e : peak.progress()) {
            if (!in_component[e.qubit_i] || !in_component[e.qubit_j])
                continue;
            const double err =
                link_error(preinfo.fidelity(e.qubit_i, e.qubit_j),
                           static_cast<double>(peak.step_count() - e.success_step), t_mem);
            const long r1 = static_cast<long>(e.qubit_i) * n + e.qubit_j;
            const long r2 = static_cast<long>(e.qubit_j) * n + e.qubit_i;
            sample.targets(r1) = static_cast<float>(err);
            sample.targets(r2) = static_cast<float>(err);
            sample.mask[r1] = 1;
            sample.mask[r2] = 1;
        }
        return rollout;
    };
}

} // namespace entsched
