#include <doctest.h>

#include <cmath>
#include <unsupported/Eigen/MatrixFunctions>

#include "helpers.hpp"
#include "qsysid/errors.hpp"
#include "qsysid/rng.hpp"
#include "qsysid/signals.hpp"
#include "qsysid/subspace.hpp"

using namespace qsysid;

namespace {

StateSpace paper_cavity() { return build_cavity({10.0, {5.0, 3.0, 2.0}}); }

MeasurementRecord cavity_record(Quadrature which, double omega, std::uint64_t seed,
                                int substeps, double duration = 80.0) {
  const StateSpace sys = paper_cavity();
  const InputSignal input = generate_prbs(6, 0.01, duration, omega, seed);
  SimulateOptions opts;
  opts.substeps = substeps;
  return simulate_homodyne(sys, which, input, seed, Vector::Zero(2), opts);
}

// largest relative discrete Markov parameter error over k = 0..5
double markov_error(const Matrix& ad, const Matrix& bd, const Matrix& cd, const Matrix& ad_ref,
                    const Matrix& bd_ref, const Matrix& cd_ref) {
  double worst = 0.0;
  Matrix ak = Matrix::Identity(ad.rows(), ad.cols());
  Matrix akr = Matrix::Identity(ad_ref.rows(), ad_ref.cols());
  for (int k = 0; k <= 5; ++k) {
    const Matrix mk = cd * ak * bd;
    const Matrix mkr = cd_ref * akr * bd_ref;
    worst = std::max(worst, (mk - mkr).cwiseAbs().maxCoeff());
    ak = ad * ak;
    akr = ad_ref * akr;
  }
  return worst;
}

}  // namespace

TEST_CASE("remove feedthrough: exact cancellation and pass-through") {
  const StateSpace sys = paper_cavity();
  const QuadratureSubsystem sub = quadrature_select(sys, Quadrature::q);
  MeasurementRecord rec;
  rec.ts = 0.01;
  rec.inputs.ts = 0.01;
  rec.inputs.samples = Matrix::Random(50, 6);
  rec.ydot = rec.inputs.samples * sub.d_meas.transpose();  // C = 0, noise-free
  CHECK(remove_feedthrough(rec, sub.d_meas).norm() < 1e-14);

  rec.inputs.samples.setZero();
  rec.ydot = Matrix::Random(50, 3);
  CHECK((remove_feedthrough(rec, sub.d_meas) - rec.ydot).norm() == 0.0);
}

TEST_CASE("remove feedthrough: leaves exactly the state component plus noise") {
  const MeasurementRecord rec = cavity_record(Quadrature::q, 300.0, 3, 1, 10.0);
  const StateSpace sys = paper_cavity();
  const QuadratureSubsystem sub = quadrature_select(sys, Quadrature::q);
  const Matrix z = remove_feedthrough(rec, sub.d_meas);
  // replay the generator's state recursion (L = 0 for the cavity q quadrature)
  RngStream noise(rec.seed, stream_tag::measurement_noise);
  Vector x = Vector::Zero(2);
  double worst = 0.0;
  for (int k = 0; k < rec.count(); ++k) {
    Vector w(3);
    for (int c = 0; c < 3; ++c) w(c) = noise.next_gauss();
    const Vector expect = sub.c_meas * x + w / std::sqrt(rec.ts);
    worst = std::max(worst, (z.row(k).transpose() - expect).norm());
    x += (sys.a * x + sys.b * rec.inputs.samples.row(k).transpose()) * rec.ts;
  }
  CHECK(worst <= 1e-9);
}

TEST_CASE("hankel: hand-checkable scalar example") {
  Matrix u(5, 1), z(5, 1);
  u << 1, 2, 3, 4, 5;
  z << 10, 20, 30, 40, 50;
  const HankelSet hs = build_hankel(u, z, 2);
  CHECK(hs.columns == 2);
  Matrix up_ref(2, 2), uf_ref(2, 2);
  up_ref << 1, 2, 2, 3;
  uf_ref << 3, 4, 4, 5;
  CHECK((hs.u_past - up_ref).norm() == 0.0);
  CHECK((hs.u_future - uf_ref).norm() == 0.0);
}

TEST_CASE("hankel: boundary j = 1 and block shapes") {
  Matrix u(4, 2), z(4, 1);
  u.setRandom();
  z.setRandom();
  const HankelSet hs = build_hankel(u, z, 2);
  CHECK(hs.columns == 1);
  CHECK(hs.u_past.rows() == 4);  // i * 2m
  CHECK(hs.u_past.cols() == 1);
  CHECK(hs.z_future.rows() == 2);
  try {
    build_hankel(u, z, 3);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InsufficientData);
  }
}

TEST_CASE("n4sid: noise-free random one-mode system is recovered to the Markov level") {
  std::mt19937_64 gen(3);
  // mild random realizable-style system, |A| Ts small
  Matrix a(2, 2);
  a << -1.0, 2.0, -2.0, -1.0;
  const Matrix b = testutil::random_matrix(gen, 2, 2);
  Matrix c = testutil::random_matrix(gen, 1, 2);
  StateSpace sys;
  sys.n = 1;
  sys.m = 1;
  sys.a = a;
  sys.b = b;
  sys.c = Matrix(2, 2);
  sys.c << c(0, 0), c(0, 1), 0.3, -0.2;
  sys.d = Matrix::Identity(2, 2);

  const double ts = 0.01;
  const InputSignal input = generate_prbs(2, ts, 60.0, 5.0, 4);
  SimulateOptions opts;
  opts.substeps = 256;
  opts.noise = false;
  const MeasurementRecord rec = simulate_homodyne(sys, Quadrature::q, input, 0, Vector::Zero(2),
                                                  opts);
  const QuadratureSubsystem sub = quadrature_select(sys, Quadrature::q);
  const ClassicalEstimate est = n4sid_estimate(rec, 1, sub.d_meas);
  CHECK(est.stable);

  // compare in discrete time against the exact ZOH-discretized truth
  const Matrix ad_ref = (a * ts).exp();
  const Matrix bd_ref = a.partialPivLu().solve((ad_ref - Matrix::Identity(2, 2)) * b);
  const Matrix ad_est = (est.a_hat * ts).exp();
  const Matrix bd_est = est.a_hat.partialPivLu().solve(
      (ad_est - Matrix::Identity(2, 2)) * est.b_hat);
  CHECK(markov_error(ad_est, bd_est, est.c_hat, ad_ref, bd_ref, sub.c_meas) <= 1e-4);
}

TEST_CASE("n4sid: paper cavity eigenvalues within five percent") {
  const MeasurementRecord rec = cavity_record(Quadrature::q, 100.0 / 0.1, 1, 16);
  const SplitRecord split = split_record(rec, 20.0, 30.0, 30.0);
  const StateSpace sys = paper_cavity();
  const QuadratureSubsystem sub = quadrature_select(sys, Quadrature::q);
  HankelConfig cfg;
  cfg.block_rows = 20;
  const ClassicalEstimate est = n4sid_estimate(split.estimation, 1, sub.d_meas, cfg);
  CHECK(est.stable);
  const auto eig = Eigen::EigenSolver<Matrix>(est.a_hat, false).eigenvalues();
  const std::complex<double> target(-5.0, 20.0);
  double best = 1e9;
  for (int k = 0; k < eig.size(); ++k)
    best = std::min(best, std::min(std::abs(eig(k) - target), std::abs(eig(k) - std::conj(target))));
  CHECK(best <= 0.05 * std::abs(target));
}

TEST_CASE("n4sid: innovation covariance near 1/Ts for the paper cavity") {
  for (double omega : {100.0, 1000.0}) {
    const MeasurementRecord rec = cavity_record(Quadrature::q, omega, 2, 16);
    const SplitRecord split = split_record(rec, 20.0, 30.0, 30.0);
    const StateSpace sys = paper_cavity();
    const QuadratureSubsystem sub = quadrature_select(sys, Quadrature::q);
    HankelConfig cfg;
    cfg.block_rows = 20;
    const ClassicalEstimate est = n4sid_estimate(split.estimation, 1, sub.d_meas, cfg);
    CHECK((est.innov_cov - 100.0 * Matrix::Identity(3, 3)).norm() <= 0.10 * 100.0 * std::sqrt(3.0));
  }
}

TEST_CASE("n4sid: singular value pair gap grows with the drive amplitude") {
  std::vector<double> gaps;
  for (double omega : {100.0, 1000.0}) {
    const MeasurementRecord rec = cavity_record(Quadrature::q, omega, 3, 8);
    const SplitRecord split = split_record(rec, 20.0, 30.0, 30.0);
    const StateSpace sys = paper_cavity();
    const QuadratureSubsystem sub = quadrature_select(sys, Quadrature::q);
    HankelConfig cfg;
    cfg.block_rows = 20;
    const ClassicalEstimate est = n4sid_estimate(split.estimation, 3, sub.d_meas, cfg);
    const auto scores = relative_energy(est.sing_values);
    gaps.push_back(scores[0] - scores[1]);
    // first pair dominates
    CHECK(est.sing_values(0) > 10.0 * est.sing_values(2));
    CHECK(scores[0] > scores[1]);
    CHECK(scores[0] > scores[2]);
  }
  CHECK(gaps[1] > gaps[0]);
}

TEST_CASE("relative energy: definition examples") {
  Vector sv(4);
  sv << 10.0, 10.0, 0.1, 0.1;
  const auto scores = relative_energy(sv);
  CHECK(scores[0] - scores[1] == doctest::Approx(4.0).epsilon(1e-12));
  Vector eq(4);
  eq << 2.0, 2.0, 2.0, 2.0;
  const auto same = relative_energy(eq);
  CHECK(same[0] == doctest::Approx(same[1]).epsilon(1e-12));
}

TEST_CASE("d2c: scalar exponential map") {
  const double ts = 0.01;
  const Matrix ad = std::exp(-ts) * Matrix::Identity(2, 2);
  const ContinuousPair cp = d2c(ad, Matrix::Zero(2, 2), ts);
  CHECK((cp.a + Matrix::Identity(2, 2)).norm() < 1e-12);
}

TEST_CASE("d2c: round trip through the paper cavity A") {
  const StateSpace sys = paper_cavity();
  const double ts = 0.01;
  const Matrix ad = (sys.a * ts).exp();
  const ContinuousPair cp = d2c(ad, Matrix::Zero(2, 2), ts);
  CHECK((cp.a - sys.a).norm() < 1e-8);
  CHECK(((cp.a * ts).exp() - ad).norm() < 1e-9);
}

TEST_CASE("d2c: zero-order-hold input matrix inversion") {
  const double ts = 0.01;
  const Matrix a = -Matrix::Identity(2, 2);
  const Matrix ad = (a * ts).exp();
  const Matrix bd = (Matrix::Identity(2, 2) - ad);  // ZOH of B = I for A = -I
  const ContinuousPair cp = d2c(ad, bd, ts);
  CHECK((cp.b - Matrix::Identity(2, 2)).norm() < 1e-10);
}

TEST_CASE("d2c: inverse of the zero-order-hold discretization on random systems") {
  std::mt19937_64 gen(15);
  for (int trial = 0; trial < 20; ++trial) {
    const int d = 2 + 2 * (trial % 2);
    Matrix a = testutil::random_hurwitz(gen, d);
    const double ts = 0.5 / a.norm();  // ||A|| Ts < 1
    const Matrix b = testutil::random_matrix(gen, d, 2);
    const Matrix ad = (a * ts).exp();
    const Matrix bd = a.partialPivLu().solve((ad - Matrix::Identity(d, d)) * b);
    const ContinuousPair cp = d2c(ad, bd, ts);
    CHECK((cp.a - a).norm() <= 1e-9 * (1.0 + a.norm()));
    CHECK((cp.b - b).norm() <= 1e-9 * (1.0 + b.norm()));
  }
}

TEST_CASE("d2c: rejects eigenvalues on the closed negative real axis") {
  Matrix ad = Matrix::Zero(2, 2);
  ad.diagonal() << -0.5, 0.3;
  try {
    d2c(ad, Matrix::Zero(2, 2), 0.01);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::LogUndefined);
  }
}

TEST_CASE("n4sid: median Markov error non-increasing in the record length") {
  const StateSpace sys = paper_cavity();
  const QuadratureSubsystem sub = quadrature_select(sys, Quadrature::q);
  const double ts = 0.01;
  const Matrix ad_ref = (sys.a * ts).exp();
  const Matrix bd_ref = sys.a.partialPivLu().solve(
      (ad_ref - Matrix::Identity(2, 2)) * sys.b);

  std::vector<double> medians;
  for (double dur : {30.0, 100.0, 300.0}) {
    std::vector<double> errs;
    for (std::uint64_t seed = 1; seed <= 9; ++seed) {
      const MeasurementRecord rec = cavity_record(Quadrature::q, 1000.0, seed, 8, dur);
      HankelConfig cfg;
      cfg.block_rows = 15;
      const ClassicalEstimate est = n4sid_estimate(rec, 1, sub.d_meas, cfg);
      const Matrix ad_est = (est.a_hat * ts).exp();
      const Matrix bd_est = est.a_hat.partialPivLu().solve(
          (ad_est - Matrix::Identity(2, 2)) * est.b_hat);
      errs.push_back(markov_error(ad_est, bd_est, est.c_hat, ad_ref, bd_ref, sub.c_meas));
    }
    std::sort(errs.begin(), errs.end());
    medians.push_back(errs[errs.size() / 2]);
  }
  CHECK(medians[1] <= medians[0] * 1.05);
  CHECK(medians[2] <= medians[1] * 1.05);
}

TEST_CASE("n4sid: insufficient data raises") {
  const MeasurementRecord rec = cavity_record(Quadrature::q, 100.0, 1, 1, 0.5);
  const StateSpace sys = paper_cavity();
  const QuadratureSubsystem sub = quadrature_select(sys, Quadrature::q);
  HankelConfig cfg;
  cfg.block_rows = 20;
  try {
    n4sid_estimate(rec, 1, sub.d_meas, cfg);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InsufficientData);
  }
}
