#pragma once

#include "entsched/qmcs/hilbert.hpp"
#include "entsched/rng.hpp"

#include <vector>

namespace entsched::qmcs {

/// Gaussian drive envelope amplitude * exp(-(t-center)^2 / (2 width^2)).
struct GaussPulse {
    double amplitude = 0.0;
    double center = 0.0;
    double width = 1.0;

    double operator()(double t) const {
        const double z = (t - center) / width;
        return amplitude * std::exp(-0.5 * z * z);
    }
};

/// Per-node physical rates, all in units of gamma_A (hbar = 1).
struct NodeParams {
    double g = 5.0;          // atom-cavity coupling
    double kappa = 0.2;      // intrinsic cavity loss
    double k_det = 10.0;     // cavity-to-detector coupling
    double gamma = 1.0;      // spontaneous decay
    double chi = 100.0;      // cyclicity; may be +infinity
    double k_dep = 0.01;     // optical dephasing
    double delta_c = 0.0;    // cavity detuning
    double delta_down = 0.0; // spin-down optical transition detuning
};

struct AtomCavityParams {
    NodeParams node_a;
    NodeParams node_b;
};

/// H(t) = static + sum_k pulse_k(t) * drive_k. Drive terms are Hermitian;
/// the static part may carry the anti-Hermitian jump correction.
struct TimeDepHamiltonian {
    SpMat h_static;
    std::vector<std::pair<SpMat, GaussPulse>> drives;

    /// out = -i H(t) x  (Schroedinger right-hand side)
    void apply_rhs(double t, const VecC& x, VecC& out) const;
    /// Allocation-free variant for tight integration loops.
    void apply_rhs(double t, const VecC& x, VecC& out, VecC& scratch) const;
    MatC dense_at(double t) const;
};

struct CollapseSet {
    std::vector<SpMat> ops;
    std::vector<double> rates;
    int detector_a_index = -1;
    int detector_b_index = -1;
};

/// The sixteen collapse channels: four spin-conserving decays, four
/// spin-flipping decays at gamma/chi, four dephasings, two intrinsic cavity
/// losses, two detector couplings on (a+b)/sqrt2 and (a-b)/sqrt2.
CollapseSet build_collapse_ops(const OperatorSet& ops, const AtomCavityParams& params);

/// Bare system Hamiltonian with the far-detuned spin-up optical transition
/// dropped: cavity and spin-down detunings, Jaynes-Cummings couplings, and
/// the two optical drive envelopes.
TimeDepHamiltonian build_h0(const OperatorSet& ops, const AtomCavityParams& params,
                            const GaussPulse& pulse_a, const GaussPulse& pulse_b);

/// Microwave Hamiltonian driving |g-down> <-> |g-up> on both atoms, on top
/// of the bare static part.
TimeDepHamiltonian build_h_pi(const OperatorSet& ops, const AtomCavityParams& params,
                              const GaussPulse& pulse_mw);

/// H_eff = H - (i/2) sum_n gamma_n C_n^dag C_n, dense form (testing oracle).
MatC effective_hamiltonian(const MatC& h, const std::vector<MatC>& collapse_ops,
                           const std::vector<double>& rates);

/// Folds the anti-Hermitian jump correction into the static part.
TimeDepHamiltonian effective_hamiltonian(const TimeDepHamiltonian& h, const CollapseSet& collapse);

struct Jump {
    double time;
    int op_index;
};

struct Trajectory {
    std::vector<Jump> jumps;
    VecC final_state; // normalized
};

struct McOptions {
    double dt = 2e-3;             // base step; must satisfy dt * max_rate <= 0.05
    bool reuse_jump_draw = false; // literal reuse of r for operator selection
    double step_tol = 1e-9;       // local error control for the adaptive stepper
};

/// Quantum-jump unraveling: integrates the non-unitary Schroedinger
/// equation with adaptive 4th-order steps until the squared norm crosses a
/// drawn threshold (bisected to dt/100), applies the selected collapse, and
/// repeats to the end of the span.
Trajectory mc_trajectory(const TimeDepHamiltonian& h_eff, const CollapseSet& collapse,
                         const VecC& psi0, double t_end, const McOptions& options, Rng& rng);

/// Dense Lindblad integrator (RK4, fixed step), Hermiticity enforced each
/// step; throws NumericError if the trace drifts beyond 1e-6.
MatC evolve_master_equation(const TimeDepHamiltonian& h, const CollapseSet& collapse,
                            const MatC& rho0, double t_end, double dt);

/// Finds the Gaussian amplitude performing a pi rotation on an isolated
/// two-level transition at zero loss (transfer >= 1 - 1e-4).
GaussPulse calibrate_pi_pulse(double center, double width);

} // namespace entsched::qmcs
