#pragma once

#include <vector>

#include "qsysid/signals.hpp"
#include "qsysid/types.hpp"

namespace qsysid {

struct HankelConfig {
  int block_rows = 10;
  double regularization = 1e-8;  // ridge scale relative to the Gram trace
};

/// Innovation-form model from combined deterministic-stochastic subspace
/// identification, converted to continuous time.
struct ClassicalEstimate {
  Matrix a_hat;      // 2n x 2n, continuous
  Matrix b_hat;      // 2n x 2m, continuous
  Matrix c_hat;      // m x 2n
  Matrix l_hat;      // 2n x m, continuous-gain convention
  Matrix innov_cov;  // m x m
  Vector sing_values;
  int order = 0;     // mode count n; state dimension is 2n
  double ts = 0.0;
  bool stable = true;  // A_hat Hurwitz; flagged rather than silently fixed
};

/// z_k = ydot_k - D_meas alpha_k, the strictly causal identification target.
Matrix remove_feedthrough(const MeasurementRecord& rec, const Matrix& d_meas);

/// Past/future block-Hankel matrices with i block rows and j = N - 2i + 1
/// columns each.
struct HankelSet {
  Matrix u_past, u_future, z_past, z_future;
  int columns = 0;
};
HankelSet build_hankel(const Matrix& u, const Matrix& z, int block_rows);

/// N4SID: oblique projection of the future outputs onto the past along the
/// future inputs, SVD-based state sequence, least-squares system matrices,
/// innovation covariance and gain, then discrete-to-continuous conversion.
ClassicalEstimate n4sid_estimate(const MeasurementRecord& rec, int order, const Matrix& d_meas,
                                 const HankelConfig& cfg = {});

/// Order-selection scores: entry k is log10(s(2k-1)^2 + s(2k)^2) over the
/// singular value pairs of the projection.
std::vector<double> relative_energy(const Vector& sing_values);

/// Principal-log conversion: A_c = log(A_d)/Ts, B_c = A_c (A_d - I)^-1 B_d.
struct ContinuousPair {
  Matrix a, b;
};
ContinuousPair d2c(const Matrix& a_d, const Matrix& b_d, double ts);

}  // namespace qsysid
