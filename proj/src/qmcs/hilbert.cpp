#include "entsched/qmcs/hilbert.hpp"

#include "entsched/common.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

namespace entsched::qmcs {

MatC kron(const MatC& a, const MatC& b) {
    MatC out(a.rows() * b.rows(), a.cols() * b.cols());
    for (long i = 0; i < a.rows(); ++i)
        for (long j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

namespace {

MatC ketbra(int row, int col) {
    MatC m = MatC::Zero(kAtomLevels, kAtomLevels);
    m(row, col) = 1.0;
    return m;
}

/// Embeds a single-factor operator at slot `which` of (atomA, atomB, cavA, cavB).
MatC embed(const MatC& op, int which) {
    const MatC id_atom = MatC::Identity(kAtomLevels, kAtomLevels);
    const MatC id_photon = MatC::Identity(kPhotonCutoff, kPhotonCutoff);
    const MatC* slots[4] = {&id_atom, &id_atom, &id_photon, &id_photon};
    slots[which] = &op;
    return kron(kron(*slots[0], *slots[1]), kron(*slots[2], *slots[3]));
}

NodeOperators build_node(int which_atom) {
    NodeOperators ops;
    ops.sz_down = embed(ketbra(kUDown, kUDown) - ketbra(kGDown, kGDown), which_atom);
    ops.sz_up = embed(ketbra(kUUp, kUUp) - ketbra(kGUp, kGUp), which_atom);
    ops.sp_down = embed(ketbra(kUDown, kGDown), which_atom);
    ops.sm_down = embed(ketbra(kGDown, kUDown), which_atom);
    ops.sp_up = embed(ketbra(kUUp, kGUp), which_atom);
    ops.sm_up = embed(ketbra(kGUp, kUUp), which_atom);
    ops.sm_flip_du = embed(ketbra(kGUp, kUDown), which_atom);
    ops.sm_flip_ud = embed(ketbra(kGDown, kUUp), which_atom);
    ops.mw_plus = embed(ketbra(kGUp, kGDown), which_atom);
    ops.mw_minus = embed(ketbra(kGDown, kGUp), which_atom);
    return ops;
}

} // namespace

OperatorSet build_operators() {
    OperatorSet set;
    set.atom_a = build_node(0);
    set.atom_b = build_node(1);
    MatC annihilate = MatC::Zero(kPhotonCutoff, kPhotonCutoff);
    annihilate(0, 1) = 1.0; // a|1> = |0>
    set.a = embed(annihilate, 2);
    set.a_dag = set.a.adjoint();
    set.b = embed(annihilate, 3);
    set.b_dag = set.b.adjoint();
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    set.c_a = inv_sqrt2 * (set.a + set.b);
    set.c_b = inv_sqrt2 * (set.a - set.b);
    return set;
}

MatC partial_trace_photons(const VecC& state) {
    if (state.size() != kDim)
        throw ShapeError("partial_trace_photons: state dimension " + std::to_string(state.size()));
    constexpr int atoms = kAtomLevels * kAtomLevels;
    constexpr int photons = kPhotonCutoff * kPhotonCutoff;
    // atoms-major layout: state[a * photons + p]
    MatC rho = MatC::Zero(atoms, atoms);
    for (int a1 = 0; a1 < atoms; ++a1)
        for (int a2 = 0; a2 < atoms; ++a2)
            for (int p = 0; p < photons; ++p)
                rho(a1, a2) += state(a1 * photons + p) * std::conj(state(a2 * photons + p));
    return rho;
}

MatC partial_trace_photons(const MatC& rho) {
    if (rho.rows() != kDim || rho.cols() != kDim)
        throw ShapeError("partial_trace_photons: density matrix must be 64x64");
    constexpr int atoms = kAtomLevels * kAtomLevels;
    constexpr int photons = kPhotonCutoff * kPhotonCutoff;
    MatC out = MatC::Zero(atoms, atoms);
    for (int a1 = 0; a1 < atoms; ++a1)
        for (int a2 = 0; a2 < atoms; ++a2)
            for (int p = 0; p < photons; ++p)
                out(a1, a2) += rho(a1 * photons + p, a2 * photons + p);
    return out;
}

MatC qubit_block(const MatC& rho_atoms) {
    if (rho_atoms.rows() != 16 || rho_atoms.cols() != 16)
        throw ShapeError("qubit_block: expected a 16x16 two-atom density matrix");
    MatC block(4, 4);
    // qubit basis: atom level g-down = 0, g-up = 1
    for (int r = 0; r < 4; ++r) {
        const int ra = r / 2, rb = r % 2;
        for (int c = 0; c < 4; ++c) {
            const int ca = c / 2, cb = c % 2;
            block(r, c) = rho_atoms(ra * kAtomLevels + rb, ca * kAtomLevels + cb);
        }
    }
    return block;
}

MatC bell_state(int sign) {
    if (sign != 1 && sign != -1)
        throw ConfigError("bell_state: sign must be +1 or -1");
    VecC psi = VecC::Zero(4);
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    psi(2) = inv_sqrt2;              // |updown> = (A=g-up, B=g-down)
    psi(1) = sign * inv_sqrt2;       // |downup>
    return psi * psi.adjoint();
}

double fidelity(const MatC& rho1, const MatC& rho2) {
    if (rho1.rows() != rho1.cols() || rho2.rows() != rho2.cols() || rho1.rows() != rho2.rows())
        throw ShapeError("fidelity: dimension mismatch");
    constexpr double tol = 1e-8;
    auto validate = [&](const MatC& rho, const char* which) {
        if ((rho - rho.adjoint()).cwiseAbs().maxCoeff() > tol)
            throw NumericError(std::string("fidelity: ") + which + " is not Hermitian");
        if (std::abs(rho.trace().real() - 1.0) > tol || std::abs(rho.trace().imag()) > tol)
            throw NumericError(std::string("fidelity: ") + which + " is not unit trace");
        Eigen::SelfAdjointEigenSolver<MatC> es(0.5 * (rho + rho.adjoint()),
                                               Eigen::EigenvaluesOnly);
        if (es.eigenvalues().minCoeff() < -tol)
            throw NumericError(std::string("fidelity: ") + which + " is not PSD");
    };
    validate(rho1, "rho1");
    validate(rho2, "rho2");

    Eigen::SelfAdjointEigenSolver<MatC> es1(0.5 * (rho1 + rho1.adjoint()));
    Eigen::VectorXd clipped = es1.eigenvalues().cwiseMax(0.0);
    MatC sqrt1 = es1.eigenvectors() * clipped.cwiseSqrt().asDiagonal() *
                 es1.eigenvectors().adjoint();
    MatC inner = sqrt1 * rho2 * sqrt1;
    Eigen::SelfAdjointEigenSolver<MatC> es2(0.5 * (inner + inner.adjoint()),
                                            Eigen::EigenvaluesOnly);
    // eigenvalues at the numerical noise floor would contribute sqrt(noise)
    // each; drop them before the square root
    double f = 0.0;
    for (long k = 0; k < es2.eigenvalues().size(); ++k)
        if (es2.eigenvalues()(k) > 1e-12)
            f += std::sqrt(es2.eigenvalues()(k));
    return std::min(1.0, std::max(0.0, f));
}

} // namespace entsched::qmcs
