#include "entsched/env.hpp"

#include "entsched/common.hpp"

#include <algorithm>
#include <sstream>

namespace entsched {

Env::Env(SimConfig config, PreInfo preinfo)
    : config_(std::move(config)),
      preinfo_(std::move(preinfo)),
      dsu_(0),
      rng_(0) {
    config_.validate_and_finalize();
    if (preinfo_.n_qubits() != config_.n_qubits)
        throw ConfigError("preinfo is " + std::to_string(preinfo_.n_qubits()) +
                          " qubits but config wants " + std::to_string(config_.n_qubits));
    const int n = config_.n_qubits;
    established_.assign(static_cast<std::size_t>(n) * n, 0);
    busy_.assign(n, 0);
    dsu_ = DisjointSet(static_cast<std::size_t>(n));
    rng_ = Rng::derived(config_.rng_seed, StreamTag::Env, 0);
}

std::vector<int> Env::idle_qubits() const {
    std::vector<int> idle;
    for (int q = 0; q < config_.n_qubits; ++q)
        if (!busy_[q])
            idle.push_back(q);
    return idle;
}

int Env::idle_count() const {
    return config_.n_qubits - 2 * static_cast<int>(workers_.size());
}

void Env::check_pair_indices(int i, int j) const {
    if (i < 0 || j < 0 || i >= config_.n_qubits || j >= config_.n_qubits || i == j)
        throw ActionError("pair (" + std::to_string(i) + "," + std::to_string(j) +
                          ") out of range");
}

bool Env::assignable(int i, int j) const {
    if (i == j || busy_[i] || busy_[j] || established(i, j))
        return false;
    if (!config_.allow_intra_component_links && dsu_.connected(i, j))
        return false;
    return true;
}

bool Env::scheduling_complete() const {
    if (static_cast<int>(workers_.size()) >= config_.max_workers)
        return true;
    const auto idle = idle_qubits();
    for (std::size_t a = 0; a < idle.size(); ++a)
        for (std::size_t b = a + 1; b < idle.size(); ++b)
            if (assignable(idle[a], idle[b]))
                return false;
    return true;
}

void Env::assign_actions(const std::vector<Action>& actions) {
    // Validate the whole batch against current state plus earlier batch
    // members before committing anything.
    std::vector<std::uint8_t> used(busy_);
    int slots = config_.max_workers - static_cast<int>(workers_.size());
    for (const auto& action : actions) {
        if (!action.is_pair())
            continue;
        const int i = action.qubit_i;
        const int j = action.qubit_j;
        check_pair_indices(i, j);
        const std::string pair = "(" + std::to_string(i) + "," + std::to_string(j) + ")";
        if (used[i] || used[j])
            throw ActionError("busy qubit in pair " + pair);
        if (established(i, j))
            throw ActionError("pair " + pair + " already has an established link");
        if (!config_.allow_intra_component_links && dsu_.connected(i, j))
            throw ActionError("pair " + pair + " lies inside one component");
        if (--slots < 0)
            throw ActionError("worker overflow at pair " + pair);
        used[i] = 1;
        used[j] = 1;
    }
    for (const auto& action : actions) {
        if (!action.is_pair())
            continue;
        workers_.push_back({action.qubit_i, action.qubit_j, step_});
        busy_[action.qubit_i] = 1;
        busy_[action.qubit_j] = 1;
    }
}

std::vector<ProgressEntry> Env::step() {
    ++step_;
    std::vector<ProgressEntry> events;
    std::vector<Worker> survivors;
    survivors.reserve(workers_.size());
    for (const Worker& w : workers_) {
        const double r = preinfo_.success_prob(w.qubit_i, w.qubit_j);
        if (rng_.bernoulli(r)) {
            established_[idx(w.qubit_i, w.qubit_j)] = 1;
            established_[idx(w.qubit_j, w.qubit_i)] = 1;
            busy_[w.qubit_i] = 0;
            busy_[w.qubit_j] = 0;
            dsu_.unite(w.qubit_i, w.qubit_j);
            ProgressEntry entry{w.qubit_i, w.qubit_j, step_,
                                static_cast<int>(dsu_.max_component_size())};
            progress_.push_back(entry);
            events.push_back(entry);
        } else {
            survivors.push_back(w);
        }
    }
    workers_ = std::move(survivors);
    return events;
}

Env::Component Env::largest_component() const {
    auto members = dsu_.largest_component_members();
    Component c;
    c.size = static_cast<int>(members.size());
    c.members.assign(members.begin(), members.end());
    return c;
}

bool Env::is_terminal() const {
    if (static_cast<double>(dsu_.max_component_size()) >
        config_.stop_fraction * config_.n_qubits)
        return true;
    return step_ >= config_.max_steps;
}

std::string progress_csv(const std::vector<ProgressEntry>& progress) {
    std::ostringstream out;
    out << "step,qubit_i,qubit_j,n_max_after\n";
    for (const auto& e : progress)
        out << e.success_step << ',' << e.qubit_i << ',' << e.qubit_j << ',' << e.n_max_after
            << '\n';
    return out.str();
}

std::string Env::progress_csv() const {
    return entsched::progress_csv(progress_);
}

} // namespace entsched
