#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <complex>

namespace entsched::qmcs {

using Complexd = std::complex<double>;
using MatC = Eigen::MatrixXcd;
using VecC = Eigen::VectorXcd;
using SpMat = Eigen::SparseMatrix<Complexd>;

/// Atomic level order within one node: {g-down, g-up, u-down, u-up}.
enum AtomLevel : int { kGDown = 0, kGUp = 1, kUDown = 2, kUUp = 3 };

inline constexpr int kAtomLevels = 4;
inline constexpr int kPhotonCutoff = 2; // Fock 0, 1
inline constexpr int kDim = kAtomLevels * kAtomLevels * kPhotonCutoff * kPhotonCutoff; // 64

/// Tensor factor order: (atom A, atom B, cavity A, cavity B).
inline int state_index(int atom_a, int atom_b, int photons_a, int photons_b) {
    return ((atom_a * kAtomLevels + atom_b) * kPhotonCutoff + photons_a) * kPhotonCutoff +
           photons_b;
}

MatC kron(const MatC& a, const MatC& b);

/// All single-node operators embedded in the 64-dimensional joint space.
struct NodeOperators {
    MatC sz_down;   // |u-><u-| - |g-><g-|
    MatC sz_up;     // |u+><u+| - |g+><g+|
    MatC sp_down;   // |u-><g-|
    MatC sm_down;   // |g-><u-|
    MatC sp_up;     // |u+><g+|
    MatC sm_up;     // |g+><u+|
    MatC sm_flip_du; // |g+><u-|  (spin-flipping decay of u-)
    MatC sm_flip_ud; // |g-><u+|  (spin-flipping decay of u+)
    MatC mw_plus;   // |g+><g-|
    MatC mw_minus;  // |g-><g+|
};

struct OperatorSet {
    NodeOperators atom_a;
    NodeOperators atom_b;
    MatC a;      // annihilation, cavity A
    MatC a_dag;
    MatC b;      // annihilation, cavity B
    MatC b_dag;
    MatC c_a;    // (a + b)/sqrt(2): detector A click
    MatC c_b;    // (a - b)/sqrt(2): detector B click
};

OperatorSet build_operators();

/// Traces out both cavity factors: 64-dim pure state or 64x64 density
/// matrix -> 16x16 two-atom density matrix.
MatC partial_trace_photons(const VecC& state);
MatC partial_trace_photons(const MatC& rho);

/// Extracts the {g-down, g-up} x {g-down, g-up} block of a 16x16 two-atom
/// density matrix as a 4x4 matrix; basis order (A,B) in
/// {downdown, downup, updown, upup}. Not renormalized.
MatC qubit_block(const MatC& rho_atoms);

/// Bell projector onto (|updown> +/- |downup>)/sqrt(2) in the 4x4 qubit space.
MatC bell_state(int sign);

/// Uhlmann fidelity Tr sqrt(sqrt(rho1) rho2 sqrt(rho1)), clamped to [0,1].
/// Inputs must be Hermitian, PSD, unit trace within 1e-8.
double fidelity(const MatC& rho1, const MatC& rho2);

} // namespace entsched::qmcs
