#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>

namespace entsched {

/// Environment parameters for one scheduling episode.
struct SimConfig {
    int n_qubits = 40;
    int max_workers = 0;          // 0 -> defaults to n_qubits / 2
    double stop_fraction = 0.75;  // terminal once N_max > stop_fraction * n_qubits
    long max_steps = 10000;       // safety cap
    bool allow_intra_component_links = false;
    double t_mem_steps = 1200.0;  // memory time expressed in attempt steps
    std::uint64_t rng_seed = 1;

    /// Applies defaults and checks invariants; throws ConfigError.
    void validate_and_finalize();
};

/// Gaussian generation parameters for the pre-information matrices.
struct GenParams {
    double mean_fidelity = 0.98;
    double sigma_fidelity = 0.0;
    double max_fidelity = 0.9999;
    double min_fidelity = 0.5;
    double mean_rate = 0.10;
    double sigma_rate = 0.02;
    double min_rate = 0.01;
    std::uint64_t rng_seed = 1;

    void validate() const;
};

enum class StrategyKind {
    Random,
    StaticMst,
    Greedy,
    Fc,
    TransformerQuPairs,
    TransformerQubit,
};

struct StrategyConfig {
    double action_threshold = 0.02; // A_th
    StrategyKind kind = StrategyKind::Greedy;

    void validate() const;
};

enum class ModelVariant { QuPairs, Qubit, Fc };

struct ModelConfig {
    int blocks = 3;
    int embed_dim = 32;
    int heads = 1;
    int ff_dim = 64;
    ModelVariant variant = ModelVariant::QuPairs;
    int qubit_variant_embed = 320; // Qubit variant embedding width
    int qubit_variant_ff = 640;
    int fc_hidden = 1000;          // FC variant hidden width
    int fc_n_qubits = 0;           // FC input is fixed to one qubit count

    void validate() const;
};

struct TrainConfig {
    int epochs = 3000;
    double learning_rate = 3e-3;
    int episodes_per_epoch = 4;
    double mixing_weight = 0.1;
    // Reward-driven exploration: antithetic per-episode Gaussian noise on
    // the prediction field during training rollouts, turned into a gradient
    // by the episode's advantage. 0 disables it, leaving pure regression.
    double explore_sigma = 0.05;
    double reward_weight = 0.6;
    // Independent training runs feeding one validation tournament.
    int restarts = 1;
    std::uint64_t rng_seed = 1;

    void validate() const;
};

const char* strategy_name(StrategyKind kind);
std::optional<StrategyKind> strategy_from_name(const std::string& name);

/// Flat INI-style config file: `[section]` headers, `key = value` lines,
/// `#` comments. Section names mirror the struct they populate:
/// [sim], [gen], [strategy], [train], [qmcs].
class ConfigFile {
public:
    static ConfigFile parse_file(const std::string& path);
    static ConfigFile parse_string(const std::string& text);

    bool has(const std::string& section, const std::string& key) const;
    std::string get(const std::string& section, const std::string& key,
                    const std::string& fallback) const;
    double get_double(const std::string& section, const std::string& key, double fallback) const;
    long get_long(const std::string& section, const std::string& key, long fallback) const;
    std::uint64_t get_u64(const std::string& section, const std::string& key,
                          std::uint64_t fallback) const;
    bool get_bool(const std::string& section, const std::string& key, bool fallback) const;

    SimConfig sim_config() const;
    GenParams gen_params() const;
    StrategyConfig strategy_config() const;
    ModelConfig model_config() const;
    TrainConfig train_config() const;

private:
    std::map<std::string, std::map<std::string, std::string>> values_;
};

/// Parallelism cap: min(hardware_concurrency, ENTSCHED_THREADS if set).
int thread_budget();

} // namespace entsched
