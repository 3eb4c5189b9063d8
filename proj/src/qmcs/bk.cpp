#include "entsched/qmcs/bk.hpp"

#include "entsched/common.hpp"
#include "entsched/metrics.hpp"
#include "entsched/parallel.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <mutex>

namespace entsched::qmcs {

BranchCost bk_cost(const std::array<double, 4>& fidelities, const std::array<double, 4>& rates,
                   double t_mem_steps) {
    BranchCost best{1.0, 0};
    bool first = true;
    for (int i = 0; i < 4; ++i) {
        const double c = rates[i] > 0.0
                             ? 1.0 - fidelities[i] * std::exp(-1.0 / (t_mem_steps * rates[i]))
                             : 1.0;
        if (first || c < best.cost) {
            best = {c, i};
            first = false;
        }
    }
    return best;
}

void BKConfig::validate() const {
    if (!(optical_tau > 0.0) || !(mw_tau > 0.0))
        throw ConfigError("bk: pulse widths must be positive");
    if (t_wait < 10.0 * optical_tau)
        throw ConfigError("bk: t_wait must cover the optical pulse (>= 10 tau)");
    if (!(t_relax > 0.0))
        throw ConfigError("bk: t_relax must be positive");
    if (n_traj < 1 || n_traj2 < 1)
        throw ConfigError("bk: trajectory counts must be positive");
    if (!(t_mem_steps > 0.0))
        throw ConfigError("bk: t_mem_steps must be positive");
}

namespace {

/// Heralding test: exactly one detector click inside the round window, and
/// it must land after the excitation gate (a click under a live pulse
/// leaves the remaining envelope free to re-excite the spins).
int single_click_detector(const Trajectory& traj, const CollapseSet& collapse, double gate,
                          double window) {
    int clicks = 0;
    int detector = -1;
    double click_time = 0.0;
    for (const auto& jump : traj.jumps) {
        if (jump.time > window)
            continue;
        if (jump.op_index == collapse.detector_a_index ||
            jump.op_index == collapse.detector_b_index) {
            ++clicks;
            detector = (jump.op_index == collapse.detector_a_index) ? 0 : 1;
            click_time = jump.time;
        }
    }
    return (clicks == 1 && click_time > gate) ? detector : -1;
}

struct EigenMixture {
    std::vector<double> weights; // normalized, descending
    std::vector<VecC> states;
};

/// Spectral decomposition of a density matrix for unbiased pure-state
/// sampling of the round-2 initial condition.
EigenMixture decompose(const MatC& rho) {
    Eigen::SelfAdjointEigenSolver<MatC> es(0.5 * (rho + rho.adjoint()));
    EigenMixture mix;
    double total = 0.0;
    for (long k = es.eigenvalues().size() - 1; k >= 0; --k) {
        const double w = es.eigenvalues()(k);
        if (w < 1e-12)
            break; // ascending order: everything below is negligible
        mix.weights.push_back(w);
        mix.states.push_back(es.eigenvectors().col(k));
        total += w;
    }
    if (mix.weights.empty())
        throw NumericError("bk: post-gate density matrix has no positive spectrum");
    for (double& w : mix.weights)
        w /= total;
    return mix;
}

const VecC& sample_state(const EigenMixture& mix, Rng& rng) {
    const double u = rng.uniform();
    double cumsum = 0.0;
    for (std::size_t k = 0; k < mix.weights.size(); ++k) {
        cumsum += mix.weights[k];
        if (u < cumsum)
            return mix.states[k];
    }
    return mix.states.back();
}

} // namespace

BKResult run_bk(const BKConfig& config) {
    config.validate();
    const OperatorSet ops = build_operators();
    const CollapseSet collapse = build_collapse_ops(ops, config.params);

    // Pulses fire early in each round window; the calibration is exact on
    // the isolated transition, heralding filters the rest.
    const GaussPulse optical = calibrate_pi_pulse(5.0 * config.optical_tau, config.optical_tau);
    const GaussPulse mw = calibrate_pi_pulse(5.0 * config.mw_tau, config.mw_tau);

    const TimeDepHamiltonian h0 = build_h0(ops, config.params, optical, optical);
    const TimeDepHamiltonian h0_eff = effective_hamiltonian(h0, collapse);
    const TimeDepHamiltonian h_pi = build_h_pi(ops, config.params, mw);
    const double mw_span = 10.0 * config.mw_tau;
    const double round_span = config.t_wait + config.t_relax;
    const double click_gate = 10.0 * config.optical_tau;

    // ((|g-> + |g+>)/sqrt2) x2 (x) vacuum
    VecC psi0 = VecC::Zero(kDim);
    for (int atom_a : {kGDown, kGUp})
        for (int atom_b : {kGDown, kGUp})
            psi0(state_index(atom_a, atom_b, 0, 0)) = 0.5;

    const McOptions mc_opts{config.dt, config.reuse_jump_draw, config.mc_step_tol};

    // round 1
    std::vector<VecC> round1_states(config.n_traj);
    std::vector<int> round1_detector(config.n_traj, -1);
    parallel_for(config.n_traj, [&](long i) {
        Rng rng = Rng::derived(config.rng_seed, StreamTag::BkRound1, i);
        Trajectory traj = mc_trajectory(h0_eff, collapse, psi0, round_span, mc_opts, rng);
        round1_detector[i] = single_click_detector(traj, collapse, click_gate, config.t_wait);
        if (round1_detector[i] >= 0)
            round1_states[i] = std::move(traj.final_state);
    });

    std::vector<long> clicked;
    for (long i = 0; i < config.n_traj; ++i)
        if (round1_detector[i] >= 0)
            clicked.push_back(i);

    // round 2, per clicked round-1 trajectory
    struct Partial {
        std::array<MatC, 4> rho_sum;
        std::array<long, 4> counts{};
        Partial() {
            for (auto& r : rho_sum)
                r = MatC::Zero(16, 16);
        }
    };
    std::vector<Partial> partials(clicked.size());

    parallel_for(static_cast<long>(clicked.size()), [&](long ci) {
        const long i = clicked[ci];
        const int d1 = round1_detector[i];
        // deterministic microwave X gate via the master equation
        const MatC rho_click = round1_states[i] * round1_states[i].adjoint();
        const MatC rho_gate = evolve_master_equation(h_pi, collapse, rho_click, mw_span, config.dt);
        const EigenMixture mix = decompose(rho_gate);

        Partial& p = partials[ci];
        for (long j = 0; j < config.n_traj2; ++j) {
            Rng rng = Rng::derived(config.rng_seed, StreamTag::BkRound2,
                                   static_cast<std::uint64_t>(i) * config.n_traj2 + j);
            const VecC& start = sample_state(mix, rng);
            Trajectory traj = mc_trajectory(h0_eff, collapse, start, round_span, mc_opts, rng);
            const int d2 = single_click_detector(traj, collapse, click_gate, config.t_wait);
            if (d2 < 0)
                continue;
            const int branch = d1 * 2 + d2; // AA, AB, BA, BB
            p.rho_sum[branch] += partial_trace_photons(traj.final_state);
            ++p.counts[branch];
        }
    });

    BKResult result;
    result.n_traj = config.n_traj;
    result.n_traj2 = config.n_traj2;
    result.normalization = 1.0;
    result.round1_clicks = static_cast<long>(clicked.size());

    std::array<MatC, 4> rho_branch;
    for (auto& r : rho_branch)
        r = MatC::Zero(16, 16);
    for (const auto& p : partials)
        for (int branch = 0; branch < 4; ++branch) {
            rho_branch[branch] += p.rho_sum[branch];
            result.counts[branch] += p.counts[branch];
        }

    long total_good = 0;
    for (int branch = 0; branch < 4; ++branch)
        total_good += result.counts[branch];
    if (total_good == 0)
        throw NumericError("bk: no good trajectory in any branch; raise n_traj");

    const double attempts = static_cast<double>(config.n_traj) * config.n_traj2;
    for (int branch = 0; branch < 4; ++branch) {
        result.branch_rates[branch] =
            result.counts[branch] * result.normalization / attempts;
        if (result.counts[branch] == 0) {
            result.branch_fidelities[branch] = 0.0;
            continue;
        }
        MatC block = qubit_block(rho_branch[branch] / static_cast<double>(result.counts[branch]));
        const double trace = block.trace().real();
        if (trace <= 0.0)
            throw NumericError("bk: branch density matrix lost all qubit population");
        block /= trace;
        result.branch_fidelities[branch] =
            fidelity(block, bell_state(branch == 0 ? +1 : -1));
    }

    const BranchCost cost = bk_cost(result.branch_fidelities, result.branch_rates,
                                    config.t_mem_steps);
    result.cost = cost.cost;
    result.chosen_branch = cost.branch;
    return result;
}

} // namespace entsched::qmcs
