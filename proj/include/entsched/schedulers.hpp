#pragma once

#include "entsched/env.hpp"
#include "entsched/metrics.hpp"

#include <limits>
#include <vector>

namespace entsched {

/// Per-pair scheduling cost grid. Masked entries (diagonal, established
/// links, same-component pairs unless allowed) carry an infinite sentinel.
class ActionMatrix {
public:
    static constexpr double kSentinel = std::numeric_limits<double>::infinity();

    ActionMatrix() = default;
    explicit ActionMatrix(int n_qubits)
        : n_(n_qubits), cost_(static_cast<std::size_t>(n_qubits) * n_qubits, kSentinel) {}

    int n_qubits() const { return n_; }
    double cost(int i, int j) const { return cost_[idx(i, j)]; }
    bool masked(int i, int j) const { return !(cost_[idx(i, j)] < kSentinel); }

    /// Sets both (i,j) and (j,i).
    void set_cost(int i, int j, double cost) {
        cost_[idx(i, j)] = cost;
        cost_[idx(j, i)] = cost;
    }

private:
    std::size_t idx(int i, int j) const { return static_cast<std::size_t>(i) * n_ + j; }

    int n_ = 0;
    std::vector<double> cost_;
};

/// Empty matrix with every non-assignable pair already masked.
ActionMatrix masked_matrix(const Env& env);

/// Every legal pair gets an i.i.d. uniform cost in [0, threshold), so that
/// none is filtered by the threshold.
ActionMatrix random_matrix(const Env& env, Rng& rng, double threshold);

/// Legal pair (i,j) costs expected_link_error(F_ij, R_ij, t_mem_steps).
ActionMatrix greedy_matrix(const Env& env, const PreInfo& preinfo, double t_mem_steps);

struct PlanEdge {
    int qubit_i;
    int qubit_j;
    double weight;
};

/// Kruskal on the complete graph weighted by expected_link_error; ties by
/// lexicographic (i,j). Returns the n-1 tree edges, weight ascending.
std::vector<PlanEdge> mst_plan(const PreInfo& preinfo, double t_mem_steps);

/// Only not-yet-established plan edges are unmasked, at their plan weight.
ActionMatrix mst_matrix(const std::vector<PlanEdge>& plan, const Env& env);

/// Sequential greedy selection: repeatedly take the cheapest unmasked entry
/// below the threshold whose qubits are still free, until workers are full
/// or nothing qualifies. Remaining capacity becomes Idle actions.
std::vector<Action> select_actions(const ActionMatrix& matrix, const Env& env,
                                   const StrategyConfig& config);

} // namespace entsched
