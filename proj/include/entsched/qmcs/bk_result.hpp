#pragma once

#include <array>
#include <cstdint>

namespace entsched::qmcs {

/// Outcome of one Barrett-Kok characterization run. Branch order is
/// {AA, AB, BA, BB} by (round-1 detector, round-2 detector).
struct BKResult {
    std::array<double, 4> branch_fidelities{};  // F1..F4
    std::array<double, 4> branch_rates{};       // R1..R4
    std::array<long, 4> counts{};               // n_AA, n_AB, n_BA, n_BB
    double cost = 1.0;                          // C
    int chosen_branch = 0;                      // 0-based index into the arrays
    long n_traj = 0;
    long n_traj2 = 0;
    double normalization = 1.0;                 // the undefined constant; kept at 1
    long round1_clicks = 0;                     // single-click round-1 trajectories

    double chosen_fidelity() const { return branch_fidelities[chosen_branch]; }
    double chosen_rate() const { return branch_rates[chosen_branch]; }
};

/// Cost over the four branches: C = min_i (1 - F_i exp(-1/(t_mem_steps R_i))).
/// Branches with zero rate cost 1. Returns (C, argmin branch), ties toward
/// the lower branch index.
struct BranchCost {
    double cost;
    int branch;
};

BranchCost bk_cost(const std::array<double, 4>& fidelities, const std::array<double, 4>& rates,
                   double t_mem_steps);

} // namespace entsched::qmcs
