#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "entsched/common.hpp"
#include "entsched/qmcs/bk.hpp"
#include "entsched/qmcs/dynamics.hpp"
#include "entsched/qmcs/hilbert.hpp"

#include "support/oracles.hpp"

#include <cmath>

using namespace entsched;
using namespace entsched::qmcs;

namespace {

/// Two-level toy system: |0> ground, |1> excited, decay op |0><1|.
struct TwoLevel {
    TimeDepHamiltonian h;
    CollapseSet collapse;

    explicit TwoLevel(double gamma, double omega = 0.0) {
        MatC ham = MatC::Zero(2, 2);
        ham(1, 1) = omega;
        h.h_static = ham.sparseView();
        MatC decay = MatC::Zero(2, 2);
        decay(0, 1) = 1.0;
        collapse.ops.push_back(decay.sparseView());
        collapse.rates.push_back(gamma);
        collapse.detector_a_index = 0;
        collapse.detector_b_index = -1;
    }
};

} // namespace

TEST_CASE("atomic raising and lowering operators compose into projectors") {
    OperatorSet ops = build_operators();
    MatC projector = ops.atom_a.sp_down * ops.atom_a.sm_down; // |u-><u-| on atom A
    CHECK((projector * projector - projector).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(projector.trace().real() == doctest::Approx(16.0)); // id on the other 16-dim factors

    // atom A and atom B operators commute
    MatC commutator = ops.atom_a.sp_down * ops.atom_b.sm_up - ops.atom_b.sm_up * ops.atom_a.sp_down;
    CHECK(commutator.cwiseAbs().maxCoeff() < 1e-14);
    commutator = ops.atom_a.sz_down * ops.atom_b.mw_plus - ops.atom_b.mw_plus * ops.atom_a.sz_down;
    CHECK(commutator.cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("photon commutator reflects the Fock cutoff") {
    OperatorSet ops = build_operators();
    MatC commutator = ops.a * ops.a_dag - ops.a_dag * ops.a;
    // on the vacuum block [a, a+] acts as the identity
    VecC vac = VecC::Zero(kDim);
    vac(state_index(kGDown, kGDown, 0, 0)) = 1.0;
    CHECK((commutator * vac - vac).cwiseAbs().maxCoeff() < 1e-14);
    // at the cutoff edge the truncation flips the sign
    VecC one = VecC::Zero(kDim);
    one(state_index(kGDown, kGDown, 1, 0)) = 1.0;
    CHECK((commutator * one + one).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("detector operators preserve photon number") {
    OperatorSet ops = build_operators();
    MatC lhs = ops.c_a.adjoint() * ops.c_a + ops.c_b.adjoint() * ops.c_b;
    MatC rhs = ops.a_dag * ops.a + ops.b_dag * ops.b;
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("bare hamiltonian structure") {
    OperatorSet ops = build_operators();
    AtomCavityParams params;
    params.node_a = {4.7, 0.3, 9.0, 1.0, 80.0, 0.02, 0.4, -0.2};
    params.node_b = {5.2, 0.1, 11.0, 0.9, 120.0, 0.01, -0.3, 0.1};
    GaussPulse pulse{3.0, 0.5, 0.1};
    TimeDepHamiltonian h = build_h0(ops, params, pulse, pulse);

    for (double t : {0.0, 0.3, 0.5, 0.9}) {
        MatC dense = h.dense_at(t);
        CHECK((dense - dense.adjoint()).cwiseAbs().maxCoeff() < 1e-12);
    }

    // g = 0 and no drive: diagonal matrix of detunings
    AtomCavityParams diag_params = params;
    diag_params.node_a.g = 0.0;
    diag_params.node_b.g = 0.0;
    TimeDepHamiltonian h_diag = build_h0(ops, diag_params, GaussPulse{}, GaussPulse{});
    MatC dense = h_diag.dense_at(0.0);
    for (long r = 0; r < dense.rows(); ++r)
        for (long c = 0; c < dense.cols(); ++c)
            if (r != c)
                CHECK(std::abs(dense(r, c)) < 1e-14);

    // <u-_A; vac| H0 |g-_A; 1_A> = -g_A
    MatC full = build_h0(ops, params, GaussPulse{}, GaussPulse{}).dense_at(0.0);
    const int bra = state_index(kUDown, kGDown, 0, 0);
    const int ket = state_index(kGDown, kGDown, 1, 0);
    CHECK(full(bra, ket).real() == doctest::Approx(-params.node_a.g).epsilon(1e-12));
    CHECK(std::abs(full(bra, ket).imag()) < 1e-14);
}

TEST_CASE("effective hamiltonian carries the jump correction") {
    MatC h = MatC::Zero(2, 2);
    h(0, 0) = 0.5;
    h(1, 1) = -0.5;

    SUBCASE("no collapse channels: unchanged") {
        CHECK((effective_hamiltonian(h, {}, {}) - h).cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("two-level decay shifts the excited level by -i gamma/2") {
        MatC decay = MatC::Zero(2, 2);
        decay(0, 1) = 1.0;
        MatC heff = effective_hamiltonian(h, {decay}, {0.8});
        CHECK(heff(1, 1).imag() == doctest::Approx(-0.4).epsilon(1e-12));
        CHECK(heff(0, 0).imag() == doctest::Approx(0.0));
    }
    SUBCASE("anti-Hermitian part is negative semidefinite times i") {
        OperatorSet ops = build_operators();
        AtomCavityParams params;
        CollapseSet collapse = build_collapse_ops(ops, params);
        std::vector<MatC> dense_ops;
        for (const auto& op : collapse.ops)
            dense_ops.push_back(MatC(op));
        MatC heff = effective_hamiltonian(build_h0(ops, params, GaussPulse{}, GaussPulse{})
                                              .dense_at(0.0),
                                          dense_ops, collapse.rates);
        MatC anti = (heff - heff.adjoint()) / Complexd(0.0, 2.0);
        Eigen::SelfAdjointEigenSolver<MatC> es(anti, Eigen::EigenvaluesOnly);
        CHECK(es.eigenvalues().maxCoeff() < 1e-12);
    }
}

TEST_CASE("trajectories with no collapse conserve the norm") {
    TwoLevel system(0.0, 1.3);
    system.collapse.ops.clear();
    system.collapse.rates.clear();
    VecC psi0(2);
    psi0 << 1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0);
    Rng rng(1);
    Trajectory traj = mc_trajectory(system.h, system.collapse, psi0, 10.0, McOptions{0.01}, rng);
    CHECK(traj.jumps.empty());
    CHECK(std::abs(traj.final_state.norm() - 1.0) < 1e-9);
}

TEST_CASE("mc rejects a step that cannot resolve the fastest rate") {
    TwoLevel system(100.0);
    VecC psi0(2);
    psi0 << 0.0, 1.0;
    Rng rng(1);
    CHECK_THROWS_AS(mc_trajectory(system.h, system.collapse, psi0, 1.0, McOptions{0.01}, rng),
                    ConfigError);
}

TEST_CASE("two-level jump times are exponentially distributed") {
    const double gamma = 0.7;
    TwoLevel system(gamma);
    VecC psi0(2);
    psi0 << 0.0, 1.0;
    const TimeDepHamiltonian h_eff = effective_hamiltonian(system.h, system.collapse);
    const int n = 10000;
    double sum = 0.0;
    long jumps = 0;
    for (int k = 0; k < n; ++k) {
        Rng rng = Rng::derived(12345, StreamTag::General, k);
        Trajectory traj =
            mc_trajectory(h_eff, system.collapse, psi0, 16.0 / gamma, McOptions{0.05}, rng);
        REQUIRE(traj.jumps.size() == 1);
        sum += traj.jumps[0].time;
        ++jumps;
    }
    const double mean = sum / jumps;
    CHECK(std::abs(mean - 1.0 / gamma) / (1.0 / gamma) < 0.05);
}

TEST_CASE("master equation reproduces the analytic two-level decay") {
    const double gamma = 0.9;
    TwoLevel system(gamma);
    MatC rho0 = MatC::Zero(2, 2);
    rho0(1, 1) = 1.0;
    MatC rho = evolve_master_equation(system.h, system.collapse, rho0, 2.0, 1e-3);
    CHECK(std::abs(rho(1, 1).real() - std::exp(-gamma * 2.0)) < 1e-6);
    CHECK(std::abs(rho.trace().real() - 1.0) < 1e-8);
}

TEST_CASE("master equation matches the unitary oracle without collapse") {
    // random 4-dim Hermitian H, no dissipation
    Rng rng(77);
    MatC h(4, 4);
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c)
            h(r, c) = Complexd(rng.uniform(-1, 1), rng.uniform(-1, 1));
    h = MatC(0.5 * (h + h.adjoint()));
    VecC psi(4);
    psi << 0.5, 0.5, 0.5, 0.5;
    MatC rho0 = psi * psi.adjoint();

    TimeDepHamiltonian td;
    td.h_static = h.sparseView();
    CollapseSet none;
    MatC evolved = evolve_master_equation(td, none, rho0, 1.5, 5e-4);
    MatC oracle = oracles::unitary_evolve(h, rho0, 1.5);
    CHECK((evolved - oracle).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("master equation rejects bad density matrices") {
    TwoLevel system(0.5);
    MatC not_unit = MatC::Identity(2, 2);
    CHECK_THROWS_AS(evolve_master_equation(system.h, system.collapse, not_unit, 1.0, 1e-3),
                    NumericError);
    MatC not_psd = MatC::Zero(2, 2);
    not_psd(0, 0) = 1.5;
    not_psd(1, 1) = -0.5;
    CHECK_THROWS_AS(evolve_master_equation(system.h, system.collapse, not_psd, 1.0, 1e-3),
                    NumericError);
}

TEST_CASE("trajectory ensembles converge to the master equation on a dim-8 system") {
    // one 4-level atom coupled to one cavity mode
    const int dim = 8; // atom(4) x photon(2)
    auto idx = [](int atom, int photon) { return atom * 2 + photon; };
    MatC h = MatC::Zero(dim, dim);
    const double g = 2.0;
    h(idx(2, 0), idx(0, 1)) = -g; // |u-,0><g-,1|
    h(idx(0, 1), idx(2, 0)) = -g;
    TimeDepHamiltonian td;
    td.h_static = h.sparseView();

    CollapseSet collapse;
    MatC decay = MatC::Zero(dim, dim); // u- -> g- at gamma
    decay(idx(0, 0), idx(2, 0)) = 1.0;
    decay(idx(0, 1), idx(2, 1)) = 1.0;
    MatC leak = MatC::Zero(dim, dim); // photon loss at kappa
    leak(idx(0, 0), idx(0, 1)) = 1.0;
    leak(idx(1, 0), idx(1, 1)) = 1.0;
    leak(idx(2, 0), idx(2, 1)) = 1.0;
    leak(idx(3, 0), idx(3, 1)) = 1.0;
    collapse.ops = {decay.sparseView(), leak.sparseView()};
    collapse.rates = {1.0, 3.0};
    collapse.detector_a_index = -1;
    collapse.detector_b_index = -1;

    VecC psi0 = VecC::Zero(dim);
    psi0(idx(2, 0)) = 1.0; // excited atom, empty cavity
    const double t_end = 1.2;

    MatC rho_ref = evolve_master_equation(td, collapse, psi0 * psi0.adjoint(), t_end, 1e-3);
    TimeDepHamiltonian h_eff = effective_hamiltonian(td, collapse);

    const int n_traj = 400;
    MatC rho_mc = MatC::Zero(dim, dim);
    for (int k = 0; k < n_traj; ++k) {
        Rng rng = Rng::derived(5150, StreamTag::General, k);
        Trajectory traj = mc_trajectory(h_eff, collapse, psi0, t_end, McOptions{0.01}, rng);
        rho_mc += traj.final_state * traj.final_state.adjoint();
    }
    rho_mc /= static_cast<double>(n_traj);
    CHECK(oracles::trace_distance(rho_mc, rho_ref) <= 5.0 / std::sqrt(n_traj));
}

TEST_CASE("pulse calibration follows the area theorem") {
    GaussPulse narrow = calibrate_pi_pulse(0.5, 0.1);
    GaussPulse wide = calibrate_pi_pulse(1.0, 0.2);
    CHECK(std::abs(wide.amplitude - 0.5 * narrow.amplitude) / (0.5 * narrow.amplitude) < 0.01);

    // applied twice ~ identity on the two-level system
    const double tau = 0.1;
    GaussPulse pulse = calibrate_pi_pulse(5.0 * tau, tau);
    Eigen::Vector2cd psi(1.0, 0.0);
    auto rhs = [&](double t, const Eigen::Vector2cd& x, Eigen::Vector2cd& out) {
        // two pi pulses in sequence
        const double w = pulse(t) + pulse(t - 10.0 * tau);
        out(0) = Complexd(0, -1) * w * x(1);
        out(1) = Complexd(0, -1) * w * x(0);
    };
    double t = 0.0;
    const double dt = 1e-3;
    Eigen::Vector2cd k1, k2, k3, k4;
    while (t < 20.0 * tau) {
        rhs(t, psi, k1);
        rhs(t + 0.5 * dt, Eigen::Vector2cd(psi + 0.5 * dt * k1), k2);
        rhs(t + 0.5 * dt, Eigen::Vector2cd(psi + 0.5 * dt * k2), k3);
        rhs(t + dt, Eigen::Vector2cd(psi + dt * k3), k4);
        psi += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        t += dt;
    }
    CHECK(std::norm(psi(0)) >= 1.0 - 5e-4);

    // zero amplitude: no transfer
    GaussPulse off{0.0, 0.5, 0.1};
    CHECK(off(0.5) == 0.0);
}

TEST_CASE("partial trace over the photons") {
    SUBCASE("product state reduces to a projector") {
        VecC psi = VecC::Zero(kDim);
        psi(state_index(kGUp, kUDown, 0, 0)) = 1.0;
        MatC rho = partial_trace_photons(psi);
        CHECK(std::abs(rho.trace().real() - 1.0) < 1e-12);
        CHECK(rho(kGUp * 4 + kUDown, kGUp * 4 + kUDown).real() == doctest::Approx(1.0));
        CHECK((rho * rho - rho).cwiseAbs().maxCoeff() < 1e-12);
    }
    SUBCASE("entangled atom-photon state reduces to a mixture") {
        VecC psi = VecC::Zero(kDim);
        psi(state_index(kGDown, kGDown, 0, 0)) = 1.0 / std::sqrt(2.0);
        psi(state_index(kGUp, kGDown, 1, 0)) = 1.0 / std::sqrt(2.0);
        MatC rho = partial_trace_photons(psi);
        CHECK(std::abs(rho.trace().real() - 1.0) < 1e-12);
        CHECK(rho(kGDown * 4 + kGDown, kGDown * 4 + kGDown).real() == doctest::Approx(0.5));
        CHECK(rho(kGUp * 4 + kGDown, kGUp * 4 + kGDown).real() == doctest::Approx(0.5));
        // coherence between the branches is destroyed by the trace
        CHECK(std::abs(rho(kGDown * 4 + kGDown, kGUp * 4 + kGDown)) < 1e-12);
    }
    SUBCASE("density-matrix input agrees with the pure-state path") {
        Rng rng(33);
        VecC psi = VecC::Zero(kDim);
        for (int k = 0; k < kDim; ++k)
            psi(k) = Complexd(rng.uniform(-1, 1), rng.uniform(-1, 1));
        psi /= psi.norm();
        MatC from_ket = partial_trace_photons(psi);
        MatC from_rho = partial_trace_photons(MatC(psi * psi.adjoint()));
        CHECK((from_ket - from_rho).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("uhlmann fidelity") {
    MatC phi_plus = bell_state(+1);
    MatC phi_minus = bell_state(-1);

    CHECK(fidelity(phi_plus, phi_plus) == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(fidelity(phi_plus, phi_minus) == doctest::Approx(0.0).epsilon(1e-10));

    // pure states: F = |<psi1|psi2>|
    Rng rng(8);
    VecC a(4), b(4);
    for (int k = 0; k < 4; ++k) {
        a(k) = Complexd(rng.uniform(-1, 1), rng.uniform(-1, 1));
        b(k) = Complexd(rng.uniform(-1, 1), rng.uniform(-1, 1));
    }
    a /= a.norm();
    b /= b.norm();
    const double overlap = std::abs((a.adjoint() * b)(0, 0));
    CHECK(fidelity(MatC(a * a.adjoint()), MatC(b * b.adjoint())) ==
          doctest::Approx(overlap).epsilon(1e-10));

    // symmetry on mixed states
    MatC rho1 = 0.5 * phi_plus + 0.5 * phi_minus;
    MatC rho2 = 0.25 * MatC::Identity(4, 4);
    CHECK(std::abs(fidelity(rho1, rho2) - fidelity(rho2, rho1)) < 1e-9);

    // non-PSD input is rejected
    MatC bad = MatC::Zero(4, 4);
    bad(0, 0) = 1.4;
    bad(1, 1) = -0.4;
    CHECK_THROWS_AS(fidelity(bad, phi_plus), NumericError);
}

TEST_CASE("bell states have the expected structure") {
    MatC phi_plus = bell_state(+1);
    CHECK(std::abs(phi_plus.trace().real() - 1.0) < 1e-12);
    CHECK(std::abs((phi_plus * phi_plus).trace().real() - 1.0) < 1e-12); // purity
    // <updown| phi+ |downup> = 1/2
    CHECK(phi_plus(2, 1).real() == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("branch cost selects the best fidelity-rate tradeoff") {
    SUBCASE("dominant branch wins") {
        BranchCost best = bk_cost({1.0, 0.0, 0.0, 0.0}, {0.9, 0.1, 0.1, 0.1}, 1000.0);
        CHECK(best.branch == 0);
        CHECK(best.cost == doctest::Approx(1.0 - std::exp(-1.0 / 900.0)).epsilon(1e-12));
    }
    SUBCASE("scalar evaluation") {
        BranchCost c = bk_cost({0.97, 0.0, 0.0, 0.0}, {0.2, 0.0, 0.0, 0.0}, 1000.0);
        CHECK(c.cost == doctest::Approx(0.03483789518309815).epsilon(1e-12));
    }
    SUBCASE("ties break to the first branch") {
        BranchCost c = bk_cost({0.9, 0.9, 0.9, 0.9}, {0.5, 0.5, 0.5, 0.5}, 1000.0);
        CHECK(c.branch == 0);
    }
    SUBCASE("zero-rate branches cost 1") {
        BranchCost c = bk_cost({1.0, 1.0, 1.0, 1.0}, {0.0, 0.0, 0.0, 0.0}, 1000.0);
        CHECK(c.cost == 1.0);
        CHECK(c.branch == 0);
    }
}

TEST_CASE("small barrett-kok run is reproducible and sane") {
    BKConfig config;
    config.n_traj = 60;
    config.n_traj2 = 40;
    config.dt = 4e-3;
    config.rng_seed = 2718;
    BKResult first = run_bk(config);
    BKResult second = run_bk(config);

    CHECK(first.counts == second.counts);
    CHECK(first.round1_clicks == second.round1_clicks);
    for (int b = 0; b < 4; ++b) {
        CHECK(first.branch_fidelities[b] == second.branch_fidelities[b]);
        CHECK(first.branch_fidelities[b] >= 0.0);
        CHECK(first.branch_fidelities[b] <= 1.0);
        CHECK(first.branch_rates[b] >= 0.0);
        CHECK(first.branch_rates[b] <= 1.0);
    }
    long total = 0;
    for (long c : first.counts)
        total += c;
    CHECK(total <= config.n_traj * config.n_traj2);
    CHECK(first.chosen_branch >= 0);
    CHECK(first.chosen_branch < 4);
    // the chosen branch should be a heralded Bell pair of decent quality
    CHECK(first.branch_fidelities[first.chosen_branch] > 0.8);
}
