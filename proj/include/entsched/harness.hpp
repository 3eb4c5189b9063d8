#pragma once

#include "entsched/agents.hpp"
#include "entsched/config.hpp"
#include "entsched/env.hpp"
#include "entsched/metrics.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace entsched {

struct EpisodeResult {
    std::uint64_t seed = 0;
    StrategyKind strategy = StrategyKind::Greedy;
    int n_qubits = 0;
    double sigma_fidelity = 0.0;
    double mu_peak = 0.0;
    long step_at_peak = 0;
    int n_max_final = 0;
    double wall_time_s = 0.0;
    bool truncated = false; // hit max_steps before the cluster-size stop
};

struct EpisodeOutcome {
    EpisodeResult result;
    std::vector<TrajectoryPoint> trajectory;
    Env peak_env; // state snapshot at the mu-peak step
    std::vector<ProgressEntry> progress; // full-episode table
};

/// Runs one full episode of the scheduling loop: schedule, step, re-schedule
/// whenever a success lands and at least two qubits are idle, stop on the
/// cluster-size threshold or the step cap.
EpisodeOutcome run_episode(const SimConfig& sim, const PreInfo& preinfo,
                           const StrategyConfig& strategy, const Agent* agent = nullptr,
                           double mixing_weight = 0.1);

struct BatchSpec {
    SimConfig sim;        // per-episode rng_seed is derived, the field is ignored
    GenParams gen;        // same
    StrategyConfig strategy;
    const Agent* agent = nullptr;
    double mixing_weight = 0.1;
    std::uint64_t base_seed = 1;
    int n_episodes = 100;
};

/// Episode k draws its pre-information and environment seeds from
/// (base_seed, k), so parallel and serial execution give identical results.
std::vector<EpisodeResult> run_batch(const BatchSpec& spec);

struct StatsSummary {
    int n = 0;
    double mean_mu = 0.0;
    double sigma_mu = 0.0;            // sigma of the mean: sample std / sqrt(n)
    double two_sigma_halfwidth = 0.0; // 2 * sigma_mu, the error bar
    std::vector<double> bin_edges;    // 31 edges for 30 fixed-width bins
    std::vector<long> counts;
    std::vector<double> cdf;
    double fit_mean = 0.0;            // moment-matched Gaussian over the samples
    double fit_std = 0.0;             // sample standard deviation
    bool degenerate_fit = false;      // zero variance
};

StatsSummary summarize(const std::vector<EpisodeResult>& results, double hist_upper);

struct StrategyDelta {
    double delta_mu_bar; // mean_b - mean_a
    double two_pow_delta;
};

StrategyDelta compare_strategies(const StatsSummary& a, const StatsSummary& b);

/// Paired comparison over common-seed batches (paired by episode index).
struct PairedComparison {
    int n = 0;
    double delta_mu_bar = 0.0; // mean of (b - a)
    double sigma_delta = 0.0;  // sample std of the paired differences
    double t_statistic = 0.0;  // delta / (sigma/sqrt(n))
    double two_pow_delta = 1.0;
};

PairedComparison paired_compare(const std::vector<EpisodeResult>& a,
                                const std::vector<EpisodeResult>& b);

enum class SweepAxis { SigmaFidelity, NQubits };

struct SweepSpec {
    SimConfig sim;
    GenParams gen;
    StrategyConfig strategy_template; // threshold shared by all strategies
    std::vector<StrategyKind> strategies;
    SweepAxis axis = SweepAxis::SigmaFidelity;
    std::vector<double> values;
    const Agent* agent = nullptr; // reused across sizes for the transformer rows
    double mixing_weight = 0.1;
    std::uint64_t base_seed = 1;
    int episodes = 100;
    // Qubit-count sweeps compare sizes at the template's fixed worker
    // budget; set true to re-derive max_workers = N/2 per size instead.
    bool scale_workers_with_n = false;
};

struct SweepRow {
    SweepAxis axis;
    double value;
    StrategyKind strategy;
    StatsSummary stats;
};

/// Full cross-product of (value, strategy); batches at the same axis value
/// share episode seeds across strategies. FC rows on an n_qubits sweep are
/// rejected (fixed input size cannot transfer).
std::vector<SweepRow> run_sweep(const SweepSpec& spec);

std::string results_csv(const std::vector<EpisodeResult>& results);
std::vector<EpisodeResult> parse_results_csv(const std::string& text);
std::string sweep_csv(const std::vector<SweepRow>& rows);
std::string summary_json(const StatsSummary& summary);

/// Rollout factory for the training loop: fresh pre-information and
/// environment per (epoch, episode), regression targets taken from the
/// realized link errors at the episode's mu peak, and (for the pair-level
/// variants) per-episode prediction noise with the visited scheduling
/// states recorded for the reward gradient.
RolloutFn make_rollout_fn(const SimConfig& sim_template, const GenParams& gen_template,
                          const StrategyConfig& strategy, const TrainConfig& train);

/// Noise-free held-out episodes for candidate validation, seeded on a
/// stream disjoint from the training episodes.
EvalFn make_eval_fn(const SimConfig& sim_template, const GenParams& gen_template,
                    const StrategyConfig& strategy, const TrainConfig& train);

} // namespace entsched
