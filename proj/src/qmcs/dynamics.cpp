#include "entsched/qmcs/dynamics.hpp"

#include "entsched/common.hpp"

#include <algorithm>
#include <cmath>

namespace entsched::qmcs {

namespace {

constexpr Complexd kMinusI{0.0, -1.0};
constexpr double kPulseCut = 1e-14; // drive treated as off below this envelope fraction

SpMat sparsify(const MatC& m) {
    SpMat s = m.sparseView(1.0, 1e-15);
    s.makeCompressed();
    return s;
}

} // namespace

void TimeDepHamiltonian::apply_rhs(double t, const VecC& x, VecC& out) const {
    out.noalias() = h_static * x;
    for (const auto& [op, pulse] : drives) {
        const double amp = pulse(t);
        if (std::abs(amp) < kPulseCut * std::max(1.0, std::abs(pulse.amplitude)))
            continue;
        out.noalias() += amp * (op * x);
    }
    out *= kMinusI;
}

void TimeDepHamiltonian::apply_rhs(double t, const VecC& x, VecC& out, VecC& scratch) const {
    out.noalias() = h_static * x;
    for (const auto& [op, pulse] : drives) {
        const double amp = pulse(t);
        if (std::abs(amp) < kPulseCut * std::max(1.0, std::abs(pulse.amplitude)))
            continue;
        scratch.noalias() = op * x;
        out.noalias() += amp * scratch;
    }
    out *= kMinusI;
}

MatC TimeDepHamiltonian::dense_at(double t) const {
    MatC h = MatC(h_static);
    for (const auto& [op, pulse] : drives)
        h += pulse(t) * MatC(op);
    return h;
}

CollapseSet build_collapse_ops(const OperatorSet& ops, const AtomCavityParams& params) {
    CollapseSet set;
    auto add = [&](const MatC& op, double rate) {
        set.ops.push_back(sparsify(op));
        set.rates.push_back(rate);
    };
    const NodeParams& a = params.node_a;
    const NodeParams& b = params.node_b;
    add(ops.atom_a.sm_down, a.gamma);
    add(ops.atom_b.sm_down, b.gamma);
    add(ops.atom_a.sm_up, a.gamma);
    add(ops.atom_b.sm_up, b.gamma);
    add(ops.atom_a.sm_flip_du, a.gamma / a.chi);
    add(ops.atom_b.sm_flip_du, b.gamma / b.chi);
    add(ops.atom_a.sm_flip_ud, a.gamma / a.chi);
    add(ops.atom_b.sm_flip_ud, b.gamma / b.chi);
    add(ops.atom_a.sz_down, a.k_dep);
    add(ops.atom_b.sz_down, b.k_dep);
    add(ops.atom_a.sz_up, a.k_dep);
    add(ops.atom_b.sz_up, b.k_dep);
    add(ops.a, a.kappa);
    add(ops.b, b.kappa);
    set.detector_a_index = static_cast<int>(set.ops.size());
    add(ops.c_a, a.k_det);
    set.detector_b_index = static_cast<int>(set.ops.size());
    add(ops.c_b, b.k_det);
    return set;
}

TimeDepHamiltonian build_h0(const OperatorSet& ops, const AtomCavityParams& params,
                            const GaussPulse& pulse_a, const GaussPulse& pulse_b) {
    const NodeParams& a = params.node_a;
    const NodeParams& b = params.node_b;
    MatC h = a.delta_c * (ops.a_dag * ops.a) + b.delta_c * (ops.b_dag * ops.b) +
             0.5 * a.delta_down * ops.atom_a.sz_down + 0.5 * b.delta_down * ops.atom_b.sz_down;
    h -= a.g * (ops.atom_a.sp_down * ops.a + ops.atom_a.sm_down * ops.a_dag);
    h -= b.g * (ops.atom_b.sp_down * ops.b + ops.atom_b.sm_down * ops.b_dag);

    TimeDepHamiltonian out;
    out.h_static = sparsify(h);
    out.drives.emplace_back(sparsify(ops.atom_a.sp_down + ops.atom_a.sm_down), pulse_a);
    out.drives.emplace_back(sparsify(ops.atom_b.sp_down + ops.atom_b.sm_down), pulse_b);
    return out;
}

TimeDepHamiltonian build_h_pi(const OperatorSet& ops, const AtomCavityParams& params,
                              const GaussPulse& pulse_mw) {
    const NodeParams& a = params.node_a;
    const NodeParams& b = params.node_b;
    MatC h = a.delta_c * (ops.a_dag * ops.a) + b.delta_c * (ops.b_dag * ops.b) +
             0.5 * a.delta_down * ops.atom_a.sz_down + 0.5 * b.delta_down * ops.atom_b.sz_down;
    h -= a.g * (ops.atom_a.sp_down * ops.a + ops.atom_a.sm_down * ops.a_dag);
    h -= b.g * (ops.atom_b.sp_down * ops.b + ops.atom_b.sm_down * ops.b_dag);

    TimeDepHamiltonian out;
    out.h_static = sparsify(h);
    out.drives.emplace_back(sparsify(ops.atom_a.mw_plus + ops.atom_a.mw_minus +
                                     ops.atom_b.mw_plus + ops.atom_b.mw_minus),
                            pulse_mw);
    return out;
}

MatC effective_hamiltonian(const MatC& h, const std::vector<MatC>& collapse_ops,
                           const std::vector<double>& rates) {
    if (collapse_ops.size() != rates.size())
        throw ConfigError("effective_hamiltonian: ops/rates length mismatch");
    MatC heff = h;
    for (std::size_t n = 0; n < collapse_ops.size(); ++n)
        heff -= Complexd(0.0, 0.5 * rates[n]) * (collapse_ops[n].adjoint() * collapse_ops[n]);
    return heff;
}

TimeDepHamiltonian effective_hamiltonian(const TimeDepHamiltonian& h,
                                         const CollapseSet& collapse) {
    MatC correction = MatC::Zero(h.h_static.rows(), h.h_static.cols());
    for (std::size_t n = 0; n < collapse.ops.size(); ++n) {
        if (collapse.rates[n] == 0.0)
            continue;
        const MatC c = MatC(collapse.ops[n]);
        correction += collapse.rates[n] * (c.adjoint() * c);
    }
    TimeDepHamiltonian out = h;
    out.h_static = sparsify(MatC(h.h_static) - Complexd(0.0, 0.5) * correction);
    return out;
}

namespace {

/// Preallocated buffers for the state-vector integrators.
struct StepScratch {
    VecC k1, k2, k3, k4, k5, k6, k7, stage, hx;
    explicit StepScratch(long n)
        : k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), stage(n), hx(n) {}
};

/// Classic RK4 step of dx/dt = rhs(t, x, out, scratch); out must not alias x.
/// Used for short bisection probes inside a located step.
template <typename Rhs>
void rk4_step(const Rhs& rhs, double t, const VecC& x, double h, StepScratch& s, VecC& out) {
    rhs(t, x, s.k1, s.hx);
    s.stage.noalias() = x + (0.5 * h) * s.k1;
    rhs(t + 0.5 * h, s.stage, s.k2, s.hx);
    s.stage.noalias() = x + (0.5 * h) * s.k2;
    rhs(t + 0.5 * h, s.stage, s.k3, s.hx);
    s.stage.noalias() = x + h * s.k3;
    rhs(t + h, s.stage, s.k4, s.hx);
    out.noalias() = x + (h / 6.0) * (s.k1 + 2.0 * s.k2 + 2.0 * s.k3 + s.k4);
}

/// Sub-stepped RK4 probe over an interval theta, capped at h_sub per step.
template <typename Rhs>
void rk4_probe(const Rhs& rhs, double t, const VecC& x, double theta, double h_sub,
               StepScratch& s, VecC& out) {
    out = x;
    double done = 0.0;
    VecC current = x;
    while (done < theta) {
        const double step = std::min(h_sub, theta - done);
        rk4_step(rhs, t + done, current, step, s, out);
        current = out;
        done += step;
    }
}

/// Dormand-Prince 4(5) embedded pair with the first-same-as-last property.
/// Advances x by h into out, returns the embedded error estimate; s.k1 must
/// hold rhs(t, x) on entry and s.k7 holds rhs(t+h, out) on exit.
template <typename Rhs>
double dp45_step(const Rhs& rhs, double t, const VecC& x, double h, StepScratch& s, VecC& out) {
    s.stage.noalias() = x + h * (0.2 * s.k1);
    rhs(t + 0.2 * h, s.stage, s.k2, s.hx);
    s.stage.noalias() = x + h * ((3.0 / 40.0) * s.k1 + (9.0 / 40.0) * s.k2);
    rhs(t + 0.3 * h, s.stage, s.k3, s.hx);
    s.stage.noalias() =
        x + h * ((44.0 / 45.0) * s.k1 - (56.0 / 15.0) * s.k2 + (32.0 / 9.0) * s.k3);
    rhs(t + 0.8 * h, s.stage, s.k4, s.hx);
    s.stage.noalias() = x + h * ((19372.0 / 6561.0) * s.k1 - (25360.0 / 2187.0) * s.k2 +
                                 (64448.0 / 6561.0) * s.k3 - (212.0 / 729.0) * s.k4);
    rhs(t + (8.0 / 9.0) * h, s.stage, s.k5, s.hx);
    s.stage.noalias() = x + h * ((9017.0 / 3168.0) * s.k1 - (355.0 / 33.0) * s.k2 +
                                 (46732.0 / 5247.0) * s.k3 + (49.0 / 176.0) * s.k4 -
                                 (5103.0 / 18656.0) * s.k5);
    rhs(t + h, s.stage, s.k6, s.hx);
    out.noalias() = x + h * ((35.0 / 384.0) * s.k1 + (500.0 / 1113.0) * s.k3 +
                             (125.0 / 192.0) * s.k4 - (2187.0 / 6784.0) * s.k5 +
                             (11.0 / 84.0) * s.k6);
    rhs(t + h, out, s.k7, s.hx);
    // difference against the embedded 4th-order solution
    s.stage.noalias() = h * ((35.0 / 384.0 - 5179.0 / 57600.0) * s.k1 +
                             (500.0 / 1113.0 - 7571.0 / 16695.0) * s.k3 +
                             (125.0 / 192.0 - 393.0 / 640.0) * s.k4 +
                             (-2187.0 / 6784.0 + 92097.0 / 339200.0) * s.k5 +
                             (11.0 / 84.0 - 187.0 / 2100.0) * s.k6 - (1.0 / 40.0) * s.k7);
    return s.stage.norm();
}

} // namespace

Trajectory mc_trajectory(const TimeDepHamiltonian& h_eff, const CollapseSet& collapse,
                         const VecC& psi0, double t_end, const McOptions& options, Rng& rng) {
    if (std::abs(psi0.norm() - 1.0) > 1e-9)
        throw ConfigError("mc_trajectory: initial state is not normalized");
    double max_rate = 0.0;
    for (double r : collapse.rates)
        max_rate = std::max(max_rate, r);
    if (options.dt * max_rate > 0.05 + 1e-12)
        throw ConfigError("mc_trajectory: dt does not resolve the fastest rate (dt*rate = " +
                          std::to_string(options.dt * max_rate) + " > 0.05)");

    auto rhs = [&](double t, const VecC& x, VecC& out, VecC& scratch) {
        h_eff.apply_rhs(t, x, out, scratch);
    };

    Trajectory traj;
    VecC psi = psi0;
    const long dim = psi0.size();
    StepScratch scratch(dim);
    VecC next(dim), probe(dim);
    double t = 0.0;
    double r = rng.uniform();
    if (r <= 0.0)
        r = std::numeric_limits<double>::min();
    double h = options.dt;
    const double h_min = options.dt / 64.0;
    const double h_max = 8.0 * options.dt;
    const double step_tol = options.step_tol;

    rhs(t, psi, scratch.k1, scratch.hx);
    while (t < t_end) {
        const double h_step = std::min(h, t_end - t);
        const double err = dp45_step(rhs, t, psi, h_step, scratch, next);
        if (err > step_tol && h_step > h_min) {
            h = std::max(h_min, h_step * std::max(0.25, 0.9 * std::pow(step_tol / err, 0.2)));
            continue; // k1 still matches (t, psi)
        }
        if (!next.allFinite())
            throw NumericError("mc_trajectory: non-finite state at t = " + std::to_string(t));

        const double norm2 = next.squaredNorm();
        if (norm2 < r) {
            // jump inside (t, t+h]: bisect the crossing to dt/100
            double lo = 0.0, hi = h_step;
            VecC at_hi = next;
            while (hi - lo > options.dt / 100.0) {
                const double mid = 0.5 * (lo + hi);
                rk4_probe(rhs, t, psi, mid, 2.0 * options.dt, scratch, probe);
                if (probe.squaredNorm() < r) {
                    hi = mid;
                    at_hi = probe;
                } else {
                    lo = mid;
                }
            }
            const double t_jump = t + hi;
            psi = at_hi;

            // select the collapse channel by cumulative probability
            std::vector<double> weights(collapse.ops.size(), 0.0);
            double total = 0.0;
            for (std::size_t n = 0; n < collapse.ops.size(); ++n) {
                if (collapse.rates[n] == 0.0)
                    continue;
                weights[n] = collapse.rates[n] * (collapse.ops[n] * psi).squaredNorm();
                total += weights[n];
            }
            if (total <= 0.0)
                throw NumericError("mc_trajectory: norm decayed with no active collapse channel");
            const double u = options.reuse_jump_draw ? r : rng.uniform();
            const double target = u * total;
            double cumsum = 0.0;
            std::size_t chosen = collapse.ops.size() - 1;
            for (std::size_t n = 0; n < collapse.ops.size(); ++n) {
                cumsum += weights[n];
                if (cumsum >= target && weights[n] > 0.0) {
                    chosen = n;
                    break;
                }
            }
            psi = collapse.ops[chosen] * psi;
            psi /= psi.norm();
            traj.jumps.push_back({t_jump, static_cast<int>(chosen)});

            t = t_jump;
            r = rng.uniform();
            if (r <= 0.0)
                r = std::numeric_limits<double>::min();
            h = options.dt;
            rhs(t, psi, scratch.k1, scratch.hx); // restart the FSAL chain
            continue;
        }

        psi.swap(next);
        t += h_step;
        scratch.k1.swap(scratch.k7); // first-same-as-last
        if (err > 0.0)
            h = std::min(h_max, h_step * std::min(4.0, 0.9 * std::pow(step_tol / err, 0.2)));
        else
            h = std::min(h_max, 4.0 * h_step);
    }

    traj.final_state = psi / psi.norm();
    return traj;
}

MatC evolve_master_equation(const TimeDepHamiltonian& h, const CollapseSet& collapse,
                            const MatC& rho0, double t_end, double dt) {
    const long dim = rho0.rows();
    if (rho0.cols() != dim)
        throw ShapeError("evolve_master_equation: rho0 must be square");
    if ((rho0 - rho0.adjoint()).cwiseAbs().maxCoeff() > 1e-9)
        throw NumericError("evolve_master_equation: rho0 is not Hermitian");
    if (std::abs(rho0.trace().real() - 1.0) > 1e-9)
        throw NumericError("evolve_master_equation: rho0 is not unit trace");
    {
        Eigen::SelfAdjointEigenSolver<MatC> es(0.5 * (rho0 + rho0.adjoint()),
                                               Eigen::EigenvaluesOnly);
        if (es.eigenvalues().minCoeff() < -1e-10)
            throw NumericError("evolve_master_equation: rho0 is not PSD");
    }

    // gamma C rho C^dag terms keep C sparse; the anticommutator uses
    // G = sum gamma C^dag C, precomputed once.
    std::vector<SpMat> active_ops;
    std::vector<SpMat> active_adjoints;
    std::vector<double> active_rates;
    MatC g_accum = MatC::Zero(dim, dim);
    for (std::size_t n = 0; n < collapse.ops.size(); ++n) {
        if (collapse.rates[n] == 0.0)
            continue;
        active_ops.push_back(collapse.ops[n]);
        active_adjoints.push_back(sparsify(MatC(collapse.ops[n]).adjoint()));
        active_rates.push_back(collapse.rates[n]);
        const MatC c = MatC(collapse.ops[n]);
        g_accum += collapse.rates[n] * (c.adjoint() * c);
    }
    const SpMat g_op = sparsify(g_accum);

    MatC commutator(dim, dim), c_rho(dim, dim), stage(dim, dim);
    auto rhs = [&](double t, const MatC& rho, MatC& out) {
        commutator.noalias() = h.h_static * rho;
        commutator.noalias() -= rho * h.h_static;
        for (const auto& [op, pulse] : h.drives) {
            const double amp = pulse(t);
            if (std::abs(amp) < kPulseCut * std::max(1.0, std::abs(pulse.amplitude)))
                continue;
            commutator.noalias() += amp * (op * rho);
            commutator.noalias() -= amp * (rho * op);
        }
        out = kMinusI * commutator;
        out.noalias() -= 0.5 * (g_op * rho);
        out.noalias() -= 0.5 * (rho * g_op);
        for (std::size_t n = 0; n < active_ops.size(); ++n) {
            c_rho.noalias() = active_ops[n] * rho;
            out.noalias() += active_rates[n] * (c_rho * active_adjoints[n]);
        }
    };

    MatC rho = rho0;
    double t = 0.0;
    MatC k1(dim, dim), k2(dim, dim), k3(dim, dim), k4(dim, dim);
    while (t < t_end) {
        const double step = std::min(dt, t_end - t);
        rhs(t, rho, k1);
        stage.noalias() = rho + (0.5 * step) * k1;
        rhs(t + 0.5 * step, stage, k2);
        stage.noalias() = rho + (0.5 * step) * k2;
        rhs(t + 0.5 * step, stage, k3);
        stage.noalias() = rho + step * k3;
        rhs(t + step, stage, k4);
        rho += (step / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        rho = 0.5 * (rho + rho.adjoint().eval()); // enforce Hermiticity
        t += step;
        const double drift = std::abs(rho.trace().real() - 1.0);
        if (drift > 1e-6)
            throw NumericError("evolve_master_equation: trace drift " + std::to_string(drift) +
                               " at t = " + std::to_string(t) + "; reduce dt");
    }
    return rho;
}

GaussPulse calibrate_pi_pulse(double center, double width) {
    if (!(width > 0.0) || !(center > 0.0))
        throw ConfigError("calibrate_pi_pulse: center and width must be positive");
    // Isolated two-level transition: H(t) = pulse(t) (|1><0| + |0><1|).
    auto transfer = [&](double amplitude) {
        GaussPulse pulse{amplitude, center, width};
        Eigen::Vector2cd psi(1.0, 0.0);
        const double t_end = 2.0 * center;
        const double dt = std::min(0.02 / std::max(amplitude, 1.0), width / 40.0);
        auto rhs = [&](double t, const Eigen::Vector2cd& x, Eigen::Vector2cd& out) {
            const double w = pulse(t);
            out(0) = kMinusI * w * x(1);
            out(1) = kMinusI * w * x(0);
        };
        double t = 0.0;
        Eigen::Vector2cd k1, k2, k3, k4;
        while (t < t_end) {
            const double h = std::min(dt, t_end - t);
            rhs(t, psi, k1);
            rhs(t + 0.5 * h, Eigen::Vector2cd(psi + 0.5 * h * k1), k2);
            rhs(t + 0.5 * h, Eigen::Vector2cd(psi + 0.5 * h * k2), k3);
            rhs(t + h, Eigen::Vector2cd(psi + h * k3), k4);
            psi += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            t += h;
        }
        return std::norm(psi(1));
    };

    // pulse-area seed: integral of the envelope must be pi/2
    const double seed = 0.5 * 3.14159265358979323846 / (width * std::sqrt(2.0 * 3.14159265358979323846));
    double lo = 0.7 * seed, hi = 1.3 * seed;
    // golden-section maximization of the transfer
    const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
    double f1 = transfer(x1), f2 = transfer(x2);
    for (int iter = 0; iter < 60 && (hi - lo) > 1e-12 * seed; ++iter) {
        if (f1 < f2) {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = transfer(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = transfer(x1);
        }
    }
    const double best = 0.5 * (lo + hi);
    if (transfer(best) < 1.0 - 1e-4)
        throw NumericError("calibrate_pi_pulse: no amplitude in bracket reaches the target "
                           "transfer");
    return GaussPulse{best, center, width};
}

} // namespace entsched::qmcs
