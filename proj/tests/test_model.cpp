#include <doctest.h>

#include "helpers.hpp"
#include "qsysid/errors.hpp"
#include "qsysid/numerics.hpp"
#include "qsysid/state_space.hpp"

using namespace qsysid;

TEST_CASE("cavity builder: paper matrices to four decimals") {
  const StateSpace sys = build_cavity({10.0, {5.0, 3.0, 2.0}});
  Matrix a_ref(2, 2);
  a_ref << -5.0, 20.0, -20.0, -5.0;
  CHECK((sys.a - a_ref).cwiseAbs().maxCoeff() < 5e-5);

  Matrix b_ref(2, 6);
  b_ref << -2.2361, 0, -1.7321, 0, -1.4142, 0,
           0, -2.2361, 0, -1.7321, 0, -1.4142;
  CHECK((sys.b - b_ref).cwiseAbs().maxCoeff() < 5e-5);

  Matrix c_ref(6, 2);
  c_ref << 2.2361, 0, 0, 2.2361, 1.7321, 0, 0, 1.7321, 1.4142, 0, 0, 1.4142;
  CHECK((sys.c - c_ref).cwiseAbs().maxCoeff() < 5e-5);
  CHECK((sys.d - Matrix::Identity(6, 6)).norm() == 0.0);
}

TEST_CASE("cavity builder: single lossy mode") {
  const StateSpace sys = build_cavity({0.0, {2.0}});
  CHECK((sys.a + Matrix::Identity(2, 2)).norm() < 1e-14);
  CHECK((sys.b + std::sqrt(2.0) * Matrix::Identity(2, 2)).norm() < 1e-14);
  CHECK((sys.c - std::sqrt(2.0) * Matrix::Identity(2, 2)).norm() < 1e-14);
  CHECK((sys.d - Matrix::Identity(2, 2)).norm() == 0.0);
}

TEST_CASE("cavity builder: rejects empty kappas") {
  try {
    build_cavity({1.0, {}});
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::EmptyKappas);
  }
}

TEST_CASE("cavity builder: every instance is exactly realizable with Z = J") {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> unif(0.1, 4.0);
  for (int trial = 0; trial < 20; ++trial) {
    CavityParams params;
    params.detuning = unif(gen) - 2.0;
    const int m = 1 + trial % 4;
    for (int j = 0; j < m; ++j) params.kappas.push_back(unif(gen));
    const StateSpace sys = build_cavity(params);
    auto [r1, r2] = realizability_residual(sys.a, sys.b, sys.c, sys.d, symplectic(1));
    CHECK(r1 < 1e-12);
    CHECK(r2 < 1e-12);
    // eigenvalues -sum(kappa)/2 +- 2 Delta i
    double total = 0.0;
    for (double k : params.kappas) total += k;
    CHECK(max_real_eig(sys.a) == doctest::Approx(-total / 2).epsilon(1e-12));
  }
}

TEST_CASE("quadrature selection: paper cavity rows") {
  const StateSpace sys = build_cavity({10.0, {5.0, 3.0, 2.0}});
  const QuadratureSubsystem q = quadrature_select(sys, Quadrature::q);
  Matrix cq_ref(3, 2);
  cq_ref << std::sqrt(5.0), 0, std::sqrt(3.0), 0, std::sqrt(2.0), 0;
  CHECK((q.c_meas - cq_ref).norm() < 1e-12);
  for (int j = 0; j < 3; ++j) {
    Vector row = Vector::Zero(6);
    row(2 * j) = 1.0;
    CHECK((q.d_meas.row(j).transpose() - row).norm() == 0.0);
  }

  const QuadratureSubsystem p = quadrature_select(sys, Quadrature::p);
  Matrix cp_ref(3, 2);
  cp_ref << 0, std::sqrt(5.0), 0, std::sqrt(3.0), 0, std::sqrt(2.0);
  CHECK((p.c_meas - cp_ref).norm() < 1e-12);
}

TEST_CASE("quadrature selection: q and p rows interleave back to the full C and D") {
  const StateSpace sys = build_cavity({3.0, {1.0, 2.0}});
  const QuadratureSubsystem q = quadrature_select(sys, Quadrature::q);
  const QuadratureSubsystem p = quadrature_select(sys, Quadrature::p);
  for (int j = 0; j < sys.m; ++j) {
    CHECK((sys.c.row(2 * j) - q.c_meas.row(j)).norm() == 0.0);
    CHECK((sys.c.row(2 * j + 1) - p.c_meas.row(j)).norm() == 0.0);
    CHECK((sys.d.row(2 * j) - q.d_meas.row(j)).norm() == 0.0);
    CHECK((sys.d.row(2 * j + 1) - p.d_meas.row(j)).norm() == 0.0);
  }
}

TEST_CASE("realizability residual: zero system") {
  const Matrix zero22 = Matrix::Zero(2, 2);
  auto [r1, r2] = realizability_residual(zero22, Matrix::Zero(2, 2), Matrix::Zero(1, 2),
                                         Matrix::Zero(1, 2), symplectic(1));
  CHECK(r1 == 0.0);
  CHECK(r2 == 0.0);
}

TEST_CASE("realizability residual: doubling B breaks constraint one by 30 sqrt 2") {
  const StateSpace sys = build_cavity({10.0, {5.0, 3.0, 2.0}});
  auto [r1, r2] = realizability_residual(sys.a, 2.0 * sys.b, sys.c, sys.d, symplectic(1));
  CHECK(r1 == doctest::Approx(30.0 * std::sqrt(2.0)).epsilon(1e-12));
  (void)r2;
}

TEST_CASE("realizability residual: invariant under the paired similarity transform") {
  std::mt19937_64 gen(9);
  const StateSpace sys = build_cavity({10.0, {5.0, 3.0, 2.0}});
  const QuadratureSubsystem q = quadrature_select(sys, Quadrature::q);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix v = testutil::random_matrix(gen, 2, 2) + 3.0 * Matrix::Identity(2, 2);
    const TransformedTriple t = similarity_transform(sys.a, sys.b, q.c_meas, v);
    const Matrix z2 = v * symplectic(1) * v.transpose();
    auto [r1, r2] = realizability_residual(t.a, t.b, t.c_meas, q.d_meas, z2);
    CHECK(r1 < 1e-10 * (1.0 + z2.norm()));
    CHECK(r2 < 1e-10 * (1.0 + z2.norm()));
  }
}

TEST_CASE("similarity transform: identity leaves the triple unchanged") {
  const StateSpace sys = build_cavity({10.0, {5.0, 3.0, 2.0}});
  const QuadratureSubsystem q = quadrature_select(sys, Quadrature::q);
  const TransformedTriple t = similarity_transform(sys.a, sys.b, q.c_meas,
                                                   Matrix::Identity(2, 2));
  CHECK((t.a - sys.a).norm() < 1e-14);
  CHECK((t.b - sys.b).norm() < 1e-14);
  CHECK((t.c_meas - q.c_meas).norm() < 1e-14);
}

TEST_CASE("similarity transform: scalar conditioning scales B and C only") {
  const StateSpace sys = build_cavity({10.0, {5.0, 3.0, 2.0}});
  const QuadratureSubsystem q = quadrature_select(sys, Quadrature::q);
  const double omega = 1000.0;
  const Matrix t6 = 6.0 * omega * Matrix::Identity(2, 2);
  const TransformedTriple t = similarity_transform(sys.a, sys.b, q.c_meas, t6);
  CHECK((t.a - sys.a).norm() < 1e-9);
  CHECK((t.b - 6.0 * omega * sys.b).norm() < 1e-9);
  CHECK((t.c_meas - q.c_meas / (6.0 * omega)).norm() < 1e-12);
}

TEST_CASE("similarity transform: transfer function and Markov parameters invariant") {
  std::mt19937_64 gen(21);
  const StateSpace sys = build_cavity({10.0, {5.0, 3.0, 2.0}});
  const QuadratureSubsystem q = quadrature_select(sys, Quadrature::q);
  const Matrix v = testutil::random_matrix(gen, 2, 2) + 2.5 * Matrix::Identity(2, 2);
  const TransformedTriple t = similarity_transform(sys.a, sys.b, q.c_meas, v);

  using CMat = Eigen::MatrixXcd;
  const std::complex<double> s(1.0, 0.0);
  auto transfer = [&](const Matrix& a, const Matrix& b, const Matrix& c) {
    CMat res = s * CMat::Identity(2, 2) - a.cast<std::complex<double>>();
    return (c.cast<std::complex<double>>() * res.lu().solve(b.cast<std::complex<double>>()))
        .eval();
  };
  CHECK((transfer(sys.a, sys.b, q.c_meas) - transfer(t.a, t.b, t.c_meas)).norm() < 1e-10);

  Matrix ak = Matrix::Identity(2, 2), tak = Matrix::Identity(2, 2);
  for (int k = 0; k <= 3; ++k) {
    const double scale = 1.0 + (q.c_meas * ak * sys.b).norm();
    CHECK((q.c_meas * ak * sys.b - t.c_meas * tak * t.b).norm() < 1e-9 * scale);
    ak = sys.a * ak;
    tak = t.a * tak;
  }
}

TEST_CASE("similarity transform: rejects singular V") {
  try {
    similarity_transform(Matrix::Identity(2, 2), Matrix::Identity(2, 2),
                         Matrix::Identity(2, 2), Matrix::Zero(2, 2));
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::SingularV);
  }
}
