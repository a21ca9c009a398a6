#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "qsysid/errors.hpp"
#include "qsysid/numerics.hpp"
#include "qsysid/projection.hpp"

using namespace qsysid;

namespace {

StateSpace paper_cavity() { return build_cavity({10.0, {5.0, 3.0, 2.0}}); }

ClassicalEstimate as_target(const Matrix& a, const Matrix& b, const Matrix& c) {
  ClassicalEstimate est;
  est.a_hat = a;
  est.b_hat = b;
  est.c_hat = c;
  est.order = static_cast<int>(a.rows()) / 2;
  est.ts = 0.01;
  est.stable = is_hurwitz(a);
  return est;
}

}  // namespace

TEST_CASE("lifted problem: dimension formulas for n = 1, m = 3") {
  const StateSpace sys = paper_cavity();
  const QuadratureSubsystem sub = quadrature_select(sys, Quadrature::q);
  const LiftedProblem prob(sys.a, sys.b, sub.c_meas, sub.d_meas, 1.0);
  CHECK(prob.g1_dim() == 19);   // 10n + 3m
  CHECK(prob.g2_dim() == 10);   // 4n + 2m
}

TEST_CASE("lifted problem: epsilon must be positive") {
  const StateSpace sys = paper_cavity();
  const QuadratureSubsystem sub = quadrature_select(sys, Quadrature::q);
  try {
    LiftedProblem prob(sys.a, sys.b, sub.c_meas, sub.d_meas, 1.0, 0.0);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InvalidArgument);
  }
}

TEST_CASE("lifted problem: the true cavity factor point satisfies every constraint") {
  const StateSpace sys = paper_cavity();
  const QuadratureSubsystem sub = quadrature_select(sys, Quadrature::q);
  LiftedProblem prob(sys.a, sys.b, sub.c_meas, sub.d_meas, 1e-9);
  Matrix g1, g2;
  prob.factor_point(sys.a, sys.b, sub.c_meas, symplectic(1), init_certificate(sys.a), &g1, &g2);
  for (const auto& [name, value] : prob.residuals(g1, g2)) {
    CAPTURE(name);
    CHECK(value <= 1e-10 * (1.0 + g1.norm()));
  }
  // block reads recover the variables exactly
  CHECK((prob.block1(g1, 2, 1) - sys.a).norm() < 1e-12);
  CHECK((prob.block1(g1, 1, 4) - sys.b).norm() < 1e-12);
  CHECK((prob.block1(g1, 5, 1) - sub.c_meas).norm() < 1e-12);
  CHECK((prob.block1(g1, 6, 1) - symplectic(1)).norm() < 1e-12);
}

TEST_CASE("lifted loss expansion matches the quadratic loss") {
  std::mt19937_64 gen(8);
  const StateSpace sys = paper_cavity();
  const QuadratureSubsystem sub = quadrature_select(sys, Quadrature::q);
  const Matrix ah = sys.a + testutil::random_matrix(gen, 2, 2, 0.3);
  const Matrix bh = sys.b + testutil::random_matrix(gen, 2, 6, 0.3);
  const Matrix ch = sub.c_meas + testutil::random_matrix(gen, 3, 2, 0.3);
  REQUIRE(is_hurwitz(ah));
  LiftedProblem prob(ah, bh, ch, sub.d_meas, 1.0);
  Matrix g1, g2;
  prob.factor_point(sys.a, sys.b, sub.c_meas, symplectic(1), init_certificate(sys.a), &g1, &g2);
  CHECK(prob.lifted_loss(g1) ==
        doctest::Approx(loss(sys.a, sys.b, sub.c_meas, ah, bh, ch)).epsilon(1e-10));
}

TEST_CASE("rank feasibility: warm start at the truth is immediately feasible") {
  const StateSpace sys = paper_cavity();
  const QuadratureSubsystem sub = quadrature_select(sys, Quadrature::q);
  LiftedProblem prob(sys.a, sys.b, sub.c_meas, sub.d_meas, 1e-9);
  const RankFeasibilityResult res = solve_rank_feasibility(
      prob, sys.a, sys.b, sub.c_meas, symplectic(1), init_certificate(sys.a));
  CHECK(res.feasible);
  CHECK(res.iterations <= 2);
  REQUIRE(res.point.has_value());
  CHECK(res.point->loss <= 1e-9);
}

TEST_CASE("rank feasibility: gamma below the minimum is infeasible") {
  // perturb one entry by 0.5 away from the realizable cavity; gamma = 0 is
  // then unattainable (the reduced solver's minimum is far above it)
  const StateSpace sys = paper_cavity();
  const QuadratureSubsystem sub = quadrature_select(sys, Quadrature::q);
  Matrix ah = sys.a;
  ah(0, 0) += 0.5;
  const ProjectionResult red = reduced_projection(as_target(ah, sys.b, sub.c_meas), sub.d_meas);
  CHECK(red.loss > 1e-4);

  LiftedProblem prob(ah, sys.b, sub.c_meas, sub.d_meas, 0.2 * red.loss);
  RankSolveOptions opts;
  opts.max_iter = 150;
  bool feasible = false;
  try {
    const RankFeasibilityResult res =
        solve_rank_feasibility(prob, ah, sys.b, sub.c_meas, symplectic(1),
                               init_certificate(ah), opts);
    feasible = res.feasible;
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NumericalStall);
  }
  CHECK(!feasible);
}

TEST_CASE("rank feasibility: certificate satisfies the constraints exactly") {
  std::mt19937_64 gen(5);
  const StateSpace sys = paper_cavity();
  const QuadratureSubsystem sub = quadrature_select(sys, Quadrature::q);
  const Matrix ah = sys.a + testutil::random_matrix(gen, 2, 2, 0.03);
  const Matrix bh = sys.b + testutil::random_matrix(gen, 2, 6, 0.03);
  const Matrix ch = sub.c_meas + testutil::random_matrix(gen, 3, 2, 0.03);
  REQUIRE(is_hurwitz(ah));
  const ProjectionResult red = reduced_projection(as_target(ah, bh, ch), sub.d_meas);

  LiftedProblem prob(ah, bh, ch, sub.d_meas, 1.5 * red.loss);
  const RankFeasibilityResult res = solve_rank_feasibility(
      prob, ah, bh, ch, symplectic(1), init_certificate(ah));
  REQUIRE(res.feasible);
  REQUIRE(res.point.has_value());
  auto [r1, r2] = realizability_residual(res.point->a, res.point->b, res.point->c_meas,
                                         sub.d_meas, res.point->z);
  CHECK(r1 <= 1e-10 * (1.0 + res.point->b.squaredNorm()));
  CHECK(r2 <= 1e-10 * (1.0 + res.point->b.squaredNorm()));
  CHECK((res.point->z + res.point->z.transpose()).norm() <= 1e-10);
  CHECK(std::abs(res.point->z.determinant()) > 1e-10);
  CHECK(res.point->loss <= 1.5 * red.loss);
}

TEST_CASE("bisection: realizable target drives gamma toward zero") {
  const StateSpace sys = paper_cavity();
  const QuadratureSubsystem sub = quadrature_select(sys, Quadrature::q);
  BisectionOptions opts;
  opts.gamma0 = 1e-2;
  opts.rounds = 12;
  opts.rank.max_iter = 150;
  const ProjectionResult res =
      bisection_identify(as_target(sys.a, sys.b, sub.c_meas), sub.d_meas, opts);
  CHECK(res.loss <= 1e-4);
  CHECK(res.gamma_final <= 1e-4);
}

TEST_CASE("bisection: zero rounds fails with no feasible point") {
  const StateSpace sys = paper_cavity();
  const QuadratureSubsystem sub = quadrature_select(sys, Quadrature::q);
  BisectionOptions opts;
  opts.rounds = 0;
  try {
    bisection_identify(as_target(sys.a, sys.b, sub.c_meas), sub.d_meas, opts);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NoFeasiblePointFound);
  }
}

TEST_CASE("bisection: perturbed target accepted near the reduced loss") {
  std::mt19937_64 gen(31);
  const StateSpace sys = paper_cavity();
  const QuadratureSubsystem sub = quadrature_select(sys, Quadrature::q);
  const Matrix ah = sys.a + testutil::random_matrix(gen, 2, 2, 0.1);
  const Matrix bh = sys.b * 1.02;
  const Matrix ch = sub.c_meas + testutil::random_matrix(gen, 3, 2, 0.05);
  REQUIRE(is_hurwitz(ah));
  const ClassicalEstimate target = as_target(ah, bh, ch);
  const ProjectionResult red = reduced_projection(target, sub.d_meas);

  BisectionOptions opts;
  opts.rounds = 16;
  opts.rank.max_iter = 150;
  opts.init_from_reduced = true;
  const ProjectionResult res = bisection_identify(target, sub.d_meas, opts);
  CHECK(res.gamma_final <= 2.0 * red.loss);
  CHECK(res.gamma_final >= 0.2 * red.loss);
  auto [r1, r2] = realizability_residual(res.realization.a, res.realization.b,
                                         res.realization.c_meas, sub.d_meas, res.realization.z);
  CHECK(r1 <= 1e-8);
  CHECK(r2 <= 1e-8);
}
