#pragma once

#include <vector>

#include "qsysid/types.hpp"

namespace qsysid {

/// Solves A X + X A' + W = 0 for the unique X (A Hurwitz).
///
/// Kronecker vectorized solve for d <= 12, complex-Schur back-substitution
/// above that. A skew-symmetric W yields a skew-symmetric X.
Matrix solve_lyapunov(const Matrix& a, const Matrix& w);

/// Stabilizing solution Q >= 0 of the filter algebraic Riccati equation
///   A Q + Q A' + B B' - (Q C' + B D')(D D')^-1 (Q C' + B D')' = 0.
///
/// Invariant-subspace method: ordered complex Schur form of the Hamiltonian,
/// followed by Newton refinement. The closed loop A - L (D D')^-1 C of the
/// returned solution is Hurwitz.
Matrix solve_filter_are(const Matrix& a, const Matrix& b, const Matrix& c_meas,
                        const Matrix& d_meas);

/// Steady-state Kalman gain L = Q C' + B D'.
Matrix kalman_gain(const Matrix& q, const Matrix& b, const Matrix& c_meas,
                   const Matrix& d_meas);

/// Integrates the Riccati differential equation with classic RK4 from q0,
/// re-symmetrizing each step. Returns Q at 0, dt, 2dt, ..., t_end.
std::vector<Matrix> integrate_rde(const Matrix& q0, const Matrix& a, const Matrix& b,
                                  const Matrix& c_meas, const Matrix& d_meas,
                                  double t_end, double dt);

/// Factors an invertible skew-symmetric Z as Z = V J_n V' with V real
/// invertible, via the real Schur form of Z. Blocks are ordered by
/// descending sigma and positive square roots are taken; V is not unique.
Matrix skew_canonical_factor(const Matrix& z);

/// Nearest (Frobenius) positive semidefinite matrix of rank <= k:
/// eigendecompose, keep the k largest eigenvalues clipped at zero.
Matrix project_psd_rank(const Matrix& m, int k);

/// Nearest positive semidefinite matrix (rank unconstrained).
Matrix project_psd(const Matrix& m);

}  // namespace qsysid
