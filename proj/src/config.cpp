#include "entsched/config.hpp"

#include "entsched/common.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

namespace entsched {

void SimConfig::validate_and_finalize() {
    if (n_qubits < 2)
        throw ConfigError("n_qubits must be >= 2, got " + std::to_string(n_qubits));
    if (max_workers == 0)
        max_workers = n_qubits / 2;
    if (max_workers < 1 || max_workers > n_qubits / 2)
        throw ConfigError("max_workers must be in [1, n_qubits/2], got " +
                          std::to_string(max_workers));
    if (!(stop_fraction > 0.0 && stop_fraction <= 1.0))
        throw ConfigError("stop_fraction must be in (0, 1]");
    if (max_steps < 1)
        throw ConfigError("max_steps must be positive");
    if (!(t_mem_steps > 0.0))
        throw ConfigError("t_mem_steps must be positive");
}

void GenParams::validate() const {
    if (!(mean_fidelity > 0.0 && mean_fidelity < 1.0))
        throw ConfigError("mean_fidelity must be in (0, 1)");
    if (sigma_fidelity < 0.0)
        throw ConfigError("sigma_fidelity must be nonnegative");
    if (!(min_fidelity > 0.0 && min_fidelity < mean_fidelity))
        throw ConfigError("min_fidelity must be in (0, mean_fidelity)");
    if (!(max_fidelity > mean_fidelity && max_fidelity <= 1.0))
        throw ConfigError("max_fidelity must be in (mean_fidelity, 1]");
    if (!(mean_rate > 0.0 && mean_rate <= 1.0))
        throw ConfigError("mean_rate must be in (0, 1]");
    if (sigma_rate < 0.0)
        throw ConfigError("sigma_rate must be nonnegative");
    if (!(min_rate > 0.0 && min_rate <= mean_rate))
        throw ConfigError("min_rate must be in (0, mean_rate]");
}

void StrategyConfig::validate() const {
    if (!(action_threshold > 0.0))
        throw ConfigError("action_threshold must be positive");
}

void ModelConfig::validate() const {
    if (blocks < 1 || embed_dim < 1 || heads < 1 || ff_dim < 1)
        throw ConfigError("model dimensions must be positive");
    if (embed_dim % heads != 0)
        throw ConfigError("embed_dim must be divisible by heads");
    if (variant == ModelVariant::Fc && fc_hidden < 1)
        throw ConfigError("fc_hidden must be positive");
}

void TrainConfig::validate() const {
    if (epochs < 1)
        throw ConfigError("epochs must be positive");
    if (!(learning_rate > 0.0))
        throw ConfigError("learning_rate must be positive");
    if (episodes_per_epoch < 1)
        throw ConfigError("episodes_per_epoch must be positive");
    if (!(mixing_weight >= 0.0 && mixing_weight <= 1.0))
        throw ConfigError("mixing_weight must be in [0, 1]");
    if (explore_sigma < 0.0)
        throw ConfigError("explore_sigma must be nonnegative");
    if (reward_weight < 0.0)
        throw ConfigError("reward_weight must be nonnegative");
    if (restarts < 1)
        throw ConfigError("restarts must be positive");
}

const char* strategy_name(StrategyKind kind) {
    switch (kind) {
    case StrategyKind::Random: return "random";
    case StrategyKind::StaticMst: return "mst";
    case StrategyKind::Greedy: return "greedy";
    case StrategyKind::Fc: return "fc";
    case StrategyKind::TransformerQuPairs: return "transformer";
    case StrategyKind::TransformerQubit: return "transformer-qubit";
    }
    return "?";
}

std::optional<StrategyKind> strategy_from_name(const std::string& name) {
    if (name == "random") return StrategyKind::Random;
    if (name == "mst") return StrategyKind::StaticMst;
    if (name == "greedy") return StrategyKind::Greedy;
    if (name == "fc") return StrategyKind::Fc;
    if (name == "transformer") return StrategyKind::TransformerQuPairs;
    if (name == "transformer-qubit") return StrategyKind::TransformerQubit;
    return std::nullopt;
}

namespace {

std::string trim(const std::string& s) {
    auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos)
        return "";
    auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

} // namespace

ConfigFile ConfigFile::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open config file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_string(buf.str());
}

ConfigFile ConfigFile::parse_string(const std::string& text) {
    ConfigFile cfg;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos)
            line = line.substr(0, hash);
        line = trim(line);
        if (line.empty())
            continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw IoError("config line " + std::to_string(lineno) + ": unterminated section");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw IoError("config line " + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw IoError("config line " + std::to_string(lineno) + ": empty key");
        cfg.values_[section][key] = value;
    }
    return cfg;
}

bool ConfigFile::has(const std::string& section, const std::string& key) const {
    auto sec = values_.find(section);
    return sec != values_.end() && sec->second.count(key) > 0;
}

std::string ConfigFile::get(const std::string& section, const std::string& key,
                            const std::string& fallback) const {
    auto sec = values_.find(section);
    if (sec == values_.end())
        return fallback;
    auto it = sec->second.find(key);
    return it == sec->second.end() ? fallback : it->second;
}

double ConfigFile::get_double(const std::string& section, const std::string& key,
                              double fallback) const {
    if (!has(section, key))
        return fallback;
    return std::stod(get(section, key, ""));
}

long ConfigFile::get_long(const std::string& section, const std::string& key,
                          long fallback) const {
    if (!has(section, key))
        return fallback;
    return std::stol(get(section, key, ""));
}

std::uint64_t ConfigFile::get_u64(const std::string& section, const std::string& key,
                                  std::uint64_t fallback) const {
    if (!has(section, key))
        return fallback;
    return std::stoull(get(section, key, ""));
}

bool ConfigFile::get_bool(const std::string& section, const std::string& key,
                          bool fallback) const {
    if (!has(section, key))
        return fallback;
    std::string v = get(section, key, "");
    std::transform(v.begin(), v.end(), v.begin(), ::tolower);
    if (v == "true" || v == "1" || v == "yes" || v == "on")
        return true;
    if (v == "false" || v == "0" || v == "no" || v == "off")
        return false;
    throw IoError("bad boolean value for " + section + "." + key + ": " + v);
}

SimConfig ConfigFile::sim_config() const {
    SimConfig c;
    c.n_qubits = static_cast<int>(get_long("sim", "n_qubits", c.n_qubits));
    c.max_workers = static_cast<int>(get_long("sim", "max_workers", c.max_workers));
    c.stop_fraction = get_double("sim", "stop_fraction", c.stop_fraction);
    c.max_steps = get_long("sim", "max_steps", c.max_steps);
    c.allow_intra_component_links =
        get_bool("sim", "allow_intra_component_links", c.allow_intra_component_links);
    c.t_mem_steps = get_double("sim", "t_mem_steps", c.t_mem_steps);
    c.rng_seed = get_u64("sim", "rng_seed", c.rng_seed);
    c.validate_and_finalize();
    return c;
}

GenParams ConfigFile::gen_params() const {
    GenParams g;
    g.mean_fidelity = get_double("gen", "mean_fidelity", g.mean_fidelity);
    g.sigma_fidelity = get_double("gen", "sigma_fidelity", g.sigma_fidelity);
    g.max_fidelity = get_double("gen", "max_fidelity", g.max_fidelity);
    g.min_fidelity = get_double("gen", "min_fidelity", g.min_fidelity);
    g.mean_rate = get_double("gen", "mean_rate", g.mean_rate);
    g.sigma_rate = get_double("gen", "sigma_rate", g.sigma_rate);
    g.min_rate = get_double("gen", "min_rate", g.min_rate);
    g.rng_seed = get_u64("gen", "rng_seed", g.rng_seed);
    g.validate();
    return g;
}

StrategyConfig ConfigFile::strategy_config() const {
    StrategyConfig s;
    s.action_threshold = get_double("strategy", "action_threshold", s.action_threshold);
    std::string kind = get("strategy", "kind", strategy_name(s.kind));
    auto parsed = strategy_from_name(kind);
    if (!parsed)
        throw ConfigError("unknown strategy kind: " + kind);
    s.kind = *parsed;
    s.validate();
    return s;
}

ModelConfig ConfigFile::model_config() const {
    ModelConfig m;
    m.blocks = static_cast<int>(get_long("model", "blocks", m.blocks));
    m.embed_dim = static_cast<int>(get_long("model", "embed_dim", m.embed_dim));
    m.heads = static_cast<int>(get_long("model", "heads", m.heads));
    m.ff_dim = static_cast<int>(get_long("model", "ff_dim", m.ff_dim));
    m.qubit_variant_embed =
        static_cast<int>(get_long("model", "qubit_variant_embed", m.qubit_variant_embed));
    m.qubit_variant_ff = static_cast<int>(get_long("model", "qubit_variant_ff", m.qubit_variant_ff));
    m.fc_hidden = static_cast<int>(get_long("model", "fc_hidden", m.fc_hidden));
    m.fc_n_qubits = static_cast<int>(get_long("model", "fc_n_qubits", m.fc_n_qubits));
    std::string variant = get("model", "variant", "qupairs");
    if (variant == "qupairs")
        m.variant = ModelVariant::QuPairs;
    else if (variant == "qubit")
        m.variant = ModelVariant::Qubit;
    else if (variant == "fc")
        m.variant = ModelVariant::Fc;
    else
        throw ConfigError("unknown model variant: " + variant);
    m.validate();
    return m;
}

TrainConfig ConfigFile::train_config() const {
    TrainConfig t;
    t.epochs = static_cast<int>(get_long("train", "epochs", t.epochs));
    t.learning_rate = get_double("train", "learning_rate", t.learning_rate);
    t.episodes_per_epoch =
        static_cast<int>(get_long("train", "episodes_per_epoch", t.episodes_per_epoch));
    t.mixing_weight = get_double("train", "mixing_weight", t.mixing_weight);
    t.explore_sigma = get_double("train", "explore_sigma", t.explore_sigma);
    t.reward_weight = get_double("train", "reward_weight", t.reward_weight);
    t.restarts = static_cast<int>(get_long("train", "restarts", t.restarts));
    t.rng_seed = get_u64("train", "rng_seed", t.rng_seed);
    t.validate();
    return t;
}

int thread_budget() {
    int hw = static_cast<int>(std::thread::hardware_concurrency());
    if (hw < 1)
        hw = 1;
    if (const char* env = std::getenv("ENTSCHED_THREADS")) {
        int cap = std::atoi(env);
        if (cap >= 1 && cap < hw)
            hw = cap;
    }
    return hw;
}

} // namespace entsched
