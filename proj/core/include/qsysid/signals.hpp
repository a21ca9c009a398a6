#pragma once

#include <cstdint>

#include "qsysid/state_space.hpp"
#include "qsysid/types.hpp"

namespace qsysid {

/// PRBS coherent drive: every entry is +omega or -omega.
struct InputSignal {
  Matrix samples;  // N x 2m
  double ts = 0.0;
  double omega = 0.0;
  std::uint64_t seed = 0;

  int count() const { return static_cast<int>(samples.rows()); }
  int channels() const { return static_cast<int>(samples.cols()); }
};

/// One single-shot homodyne record: inputs plus the measured output
/// derivative of the chosen quadrature.
struct MeasurementRecord {
  Quadrature quadrature = Quadrature::q;
  InputSignal inputs;
  Matrix ydot;  // N x m
  double ts = 0.0;
  std::uint64_t seed = 0;
  int substeps = 1;  // drift sub-step factor used by the generator

  int count() const { return static_cast<int>(ydot.rows()); }
  int channels() const { return static_cast<int>(ydot.cols()); }
};

struct SimulateOptions {
  int substeps = 1;       // refine the deterministic drift within each sample
  bool noise = true;      // test hook: w == 0 when false
};

/// Independent fair +/-omega sequence per channel from a seeded stream.
InputSignal generate_prbs(int channels, double ts, double duration, double omega,
                          std::uint64_t seed);

/// Integrates the steady-state quantum Kalman filter driven by the input:
///   ydot_k = C x_k + D a_k + (D D') w_k / sqrt(Ts)
///   x_{k+1} = drift(x_k, a_k) + L sqrt(Ts) w_k
/// with w_k i.i.d. standard normal from a stream independent of the input
/// bits. drift is Euler at Ts (substeps = 1) or sub-stepped Euler.
MeasurementRecord simulate_homodyne(const StateSpace& sys, Quadrature which,
                                    const InputSignal& input, std::uint64_t seed,
                                    const Vector& x0, const SimulateOptions& opts = {});

/// Contiguous burn / estimation / validation split; the burn-in is dropped.
/// Boundaries land on floor(t / Ts) sample indices.
struct SplitRecord {
  MeasurementRecord estimation;
  MeasurementRecord validation;
};
SplitRecord split_record(const MeasurementRecord& rec, double t_burn, double t_est, double t_val);

}  // namespace qsysid
