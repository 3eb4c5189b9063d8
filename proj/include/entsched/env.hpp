#pragma once

#include "entsched/config.hpp"
#include "entsched/dsu.hpp"
#include "entsched/preinfo.hpp"
#include "entsched/rng.hpp"

#include <string>
#include <vector>

namespace entsched {

/// A scheduling decision: attempt entanglement on one qubit pair, or do nothing.
struct Action {
    enum class Kind { Pair, Idle };
    Kind kind = Kind::Idle;
    int qubit_i = -1;
    int qubit_j = -1;

    static Action pair(int i, int j) {
        Action a;
        a.kind = Kind::Pair;
        a.qubit_i = std::min(i, j);
        a.qubit_j = std::max(i, j);
        return a;
    }
    static Action idle() { return Action{}; }
    bool is_pair() const { return kind == Kind::Pair; }
};

/// One successful entanglement event, as recorded in the progress table.
struct ProgressEntry {
    int qubit_i;       // i < j
    int qubit_j;
    long success_step; // N_t at which the attempt succeeded
    int n_max_after;   // largest component size right after the union
};

/// CSV rows `step,qubit_i,qubit_j,n_max_after`.
std::string progress_csv(const std::vector<ProgressEntry>& progress);

/// An in-flight entanglement attempt.
struct Worker {
    int qubit_i;
    int qubit_j;
    long start_step;
};

/// Discrete-time probabilistic entanglement environment. Single-owner
/// mutable: one episode advances on one thread; copies are independent.
class Env {
public:
    Env(SimConfig config, PreInfo preinfo);

    const SimConfig& config() const { return config_; }
    const PreInfo& preinfo() const { return preinfo_; }

    long step_count() const { return step_; }
    const std::vector<Worker>& workers() const { return workers_; }
    const std::vector<ProgressEntry>& progress() const { return progress_; }

    bool established(int i, int j) const { return established_[idx(i, j)] != 0; }
    bool same_component(int i, int j) const { return dsu_.connected(i, j); }

    bool qubit_busy(int q) const { return busy_[q] != 0; }
    std::vector<int> idle_qubits() const;
    int idle_count() const;

    /// A pair is assignable when both qubits are idle, the link does not
    /// already exist, and (unless configured otherwise) the qubits sit in
    /// different components.
    bool assignable(int i, int j) const;

    /// True when no further pair can be assigned: workers full or no
    /// assignable idle pair remains (the f1 check).
    bool scheduling_complete() const;

    /// Enough idle qubits for another scheduling round (the f2 check).
    bool enough_idle_qubits() const { return idle_count() >= 2; }

    /// Validates and commits a batch of actions; Idle entries are no-ops.
    /// Throws ActionError naming the offending pair.
    void assign_actions(const std::vector<Action>& actions);

    /// Advances one time step: every active attempt succeeds independently
    /// with probability R_ij. Returns entries for this step's successes.
    std::vector<ProgressEntry> step();

    struct Component {
        int size;
        std::vector<int> members;
    };
    Component largest_component() const;
    int largest_component_size() const { return static_cast<int>(dsu_.max_component_size()); }

    bool is_terminal() const;

    /// CSV rows `step,qubit_i,qubit_j,n_max_after`.
    std::string progress_csv() const;

private:
    std::size_t idx(int i, int j) const {
        return static_cast<std::size_t>(i) * config_.n_qubits + j;
    }
    void check_pair_indices(int i, int j) const;

    SimConfig config_;
    PreInfo preinfo_;
    long step_ = 0;
    std::vector<std::uint8_t> established_;
    std::vector<std::uint8_t> busy_;
    std::vector<Worker> workers_;
    DisjointSet dsu_;
    std::vector<ProgressEntry> progress_;
    Rng rng_;
};

} // namespace entsched
