#pragma once

#include <utility>
#include <vector>

#include "qsysid/types.hpp"

namespace qsysid {

enum class Quadrature { q, p };

inline const char* to_string(Quadrature w) { return w == Quadrature::q ? "q" : "p"; }

/// Quadrature-form continuous-time linear system, n oscillator modes coupled
/// to m fields: A is 2n x 2n, B is 2n x 2m, C is 2m x 2n, D is 2m x 2m.
/// Outputs and inputs interleave amplitude/phase pairs (q1, p1, ..., qm, pm).
struct StateSpace {
  Matrix a, b, c, d;
  int n = 0;
  int m = 0;

  void validate() const;
};

/// Measured rows of (C, D) for one homodyne quadrature.
struct QuadratureSubsystem {
  Quadrature which = Quadrature::q;
  Matrix c_meas;  // m x 2n
  Matrix d_meas;  // m x 2m
};

/// Detuned passive cavity family: one mode, m loss channels.
struct CavityParams {
  double detuning = 0.0;            // rad/s
  std::vector<double> kappas;       // 1/s, one per field
};

/// A StateSpace together with the structure matrix Z, filter covariance Q and
/// gain L certifying physical realizability of the measured quadrature triple.
struct QuantumRealization {
  Matrix a;       // 2n x 2n
  Matrix b;       // 2n x 2m
  Matrix c_meas;  // m x 2n
  Matrix d_meas;  // m x 2m
  Matrix z;       // 2n x 2n skew, invertible
  Matrix q;       // 2n x 2n PSD
  Matrix l_gain;  // 2n x m

  int modes() const { return static_cast<int>(a.rows()) / 2; }
  int fields() const { return static_cast<int>(b.cols()) / 2; }
};

/// Builds the cavity model: A = -(sum k / 2) I + 2 Delta J, B = [-sqrt(k_j) I],
/// C = [sqrt(k_j) I] stacked, D = I.
StateSpace build_cavity(const CavityParams& params);

/// Extracts the odd (q) or even (p) output rows of C and D.
QuadratureSubsystem quadrature_select(const StateSpace& sys, Quadrature which);

/// Frobenius norms of the two physical-realizability constraint residuals
///   r1 = ||A Z + Z A' + B Jm B'||,  r2 = ||Z C_meas' + B Jm D_meas'||.
std::pair<double, double> realizability_residual(const Matrix& a, const Matrix& b,
                                                 const Matrix& c_meas, const Matrix& d_meas,
                                                 const Matrix& z);

/// (A, B, C_meas) -> (V A V^-1, V B, C_meas V^-1); D is untouched.
struct TransformedTriple {
  Matrix a, b, c_meas;
};
TransformedTriple similarity_transform(const Matrix& a, const Matrix& b, const Matrix& c_meas,
                                       const Matrix& v);

}  // namespace qsysid
