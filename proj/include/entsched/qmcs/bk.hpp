#pragma once

#include "entsched/qmcs/bk_result.hpp"
#include "entsched/qmcs/dynamics.hpp"
#include "entsched/qmcs/hilbert.hpp"

#include <cstdint>

namespace entsched::qmcs {

struct BKConfig {
    AtomCavityParams params;
    double optical_tau = 0.02; // Gaussian width of the optical pi pulse
    double mw_tau = 0.05;      // Gaussian width of the microwave pi pulse
    double t_wait = 2.0;       // per-round monitoring window
    double t_relax = 1.0;      // post-round relaxation
    long n_traj = 300;
    long n_traj2 = 300;
    double t_mem_steps = 2000.0; // memory horizon for the branch cost
    double dt = 2e-3;
    double mc_step_tol = 1e-7;   // per-step error control inside trajectories
    std::uint64_t rng_seed = 1;
    bool reuse_jump_draw = false;

    void validate() const;
};

/// Full two-round Barrett-Kok characterization: round-1 trajectories from
/// ((|g-down> + |g-up>)/sqrt2)^x2 (x) vacuum, single-click heralding, a
/// deterministic master-equation microwave X gate, round-2 re-excitation,
/// branch-resolved spin density matrices, fidelities against the Bell
/// states, rates, and the cost-minimizing branch.
///
/// Monitoring starts once the excitation pulse has died out (10 tau): a
/// round heralds only when its single detector click lands after that gate,
/// since a click under a live pulse leaves the spins open to re-excitation.
BKResult run_bk(const BKConfig& config);

} // namespace entsched::qmcs
