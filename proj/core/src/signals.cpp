#include "qsysid/signals.hpp"

#include <cmath>

#include "qsysid/errors.hpp"
#include "qsysid/numerics.hpp"
#include "qsysid/rng.hpp"

namespace qsysid {

InputSignal generate_prbs(int channels, double ts, double duration, double omega,
                          std::uint64_t seed) {
  require(ts > 0, ErrorKind::InvalidArgument, "Ts must be positive");
  const auto n = static_cast<int>(std::llround(duration / ts));
  require(n >= 1, ErrorKind::NonPositiveDuration, "duration must cover at least one sample");
  InputSignal sig;
  sig.ts = ts;
  sig.omega = omega;
  sig.seed = seed;
  sig.samples = Matrix(n, channels);
  RngStream rng(seed, stream_tag::prbs);
  for (int k = 0; k < n; ++k)
    for (int c = 0; c < channels; ++c) sig.samples(k, c) = omega * rng.next_sign();
  return sig;
}

MeasurementRecord simulate_homodyne(const StateSpace& sys, Quadrature which,
                                    const InputSignal& input, std::uint64_t seed,
                                    const Vector& x0, const SimulateOptions& opts) {
  sys.validate();
  require(input.channels() == 2 * sys.m, ErrorKind::DimensionMismatch,
          "input channel count must be 2m");
  require(x0.size() == 2 * sys.n, ErrorKind::DimensionMismatch, "x0 must be 2n");
  require(opts.substeps >= 1, ErrorKind::InvalidArgument, "substeps must be >= 1");
  require(is_hurwitz(sys.a), ErrorKind::NotHurwitz, "A must be Hurwitz");

  const QuadratureSubsystem sub = quadrature_select(sys, which);
  const Matrix q = solve_filter_are(sys.a, sys.b, sub.c_meas, sub.d_meas);
  const Matrix l = kalman_gain(q, sys.b, sub.c_meas, sub.d_meas);
  const Matrix ddt = sub.d_meas * sub.d_meas.transpose();

  const double ts = input.ts;
  const int n_samples = input.count();
  const int m = sys.m;
  const double dt = ts / opts.substeps;
  const double sqrt_ts = std::sqrt(ts);

  MeasurementRecord rec;
  rec.quadrature = which;
  rec.inputs = input;
  rec.ts = ts;
  rec.seed = seed;
  rec.substeps = opts.substeps;
  rec.ydot = Matrix(n_samples, m);

  // The quadrature enters the stream tag: q and p records of one seed are
  // distinct stochastic evolutions of the same drive.
  RngStream noise(seed, stream_tag::measurement_noise ^ static_cast<std::uint64_t>(which));
  Vector x = x0;
  Vector w(m);
  for (int k = 0; k < n_samples; ++k) {
    const auto alpha = input.samples.row(k).transpose();
    for (int c = 0; c < m; ++c) w(c) = opts.noise ? noise.next_gauss() : 0.0;
    rec.ydot.row(k) = (sub.c_meas * x + sub.d_meas * alpha + ddt * w / sqrt_ts).transpose();
    const Vector drive = sys.b * alpha;
    for (int s = 0; s < opts.substeps; ++s) x += (sys.a * x + drive) * dt;
    x += l * w * sqrt_ts;
  }
  return rec;
}

SplitRecord split_record(const MeasurementRecord& rec, double t_burn, double t_est, double t_val) {
  require(rec.ts > 0, ErrorKind::InvalidArgument, "record has no sample time");
  const int n = rec.count();
  const auto idx = [&](double t) { return static_cast<int>(std::floor(t / rec.ts + 1e-9)); };
  const int i0 = idx(t_burn);
  const int i1 = idx(t_burn + t_est);
  const int i2 = idx(t_burn + t_est + t_val);
  require(i2 <= n, ErrorKind::InsufficientData, "record shorter than burn + est + val");
  require(i1 > i0, ErrorKind::InsufficientData, "estimation slice is empty");
  require(i2 > i1, ErrorKind::InsufficientData, "validation slice is empty");

  auto slice = [&](int lo, int hi) {
    MeasurementRecord out;
    out.quadrature = rec.quadrature;
    out.ts = rec.ts;
    out.seed = rec.seed;
    out.substeps = rec.substeps;
    out.inputs.ts = rec.inputs.ts;
    out.inputs.omega = rec.inputs.omega;
    out.inputs.seed = rec.inputs.seed;
    out.inputs.samples = rec.inputs.samples.middleRows(lo, hi - lo);
    out.ydot = rec.ydot.middleRows(lo, hi - lo);
    return out;
  };
  return {slice(i0, i1), slice(i1, i2)};
}

}  // namespace qsysid
