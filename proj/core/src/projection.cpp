#include "qsysid/projection.hpp"

#include <cmath>

#include "qsysid/errors.hpp"
#include "qsysid/numerics.hpp"

namespace qsysid {

double loss(const Matrix& a, const Matrix& b, const Matrix& c_meas, const Matrix& a_hat,
            const Matrix& b_hat, const Matrix& c_hat) {
  require(a.rows() == a_hat.rows() && a.cols() == a_hat.cols() && b.rows() == b_hat.rows() &&
              b.cols() == b_hat.cols() && c_meas.rows() == c_hat.rows() &&
              c_meas.cols() == c_hat.cols(),
          ErrorKind::DimensionMismatch, "triple shape mismatch");
  return 0.5 * ((a - a_hat).squaredNorm() + (b - b_hat).squaredNorm() +
                (c_meas - c_hat).squaredNorm());
}

Matrix init_certificate(const Matrix& a_hat) {
  require(is_hurwitz(a_hat), ErrorKind::NotHurwitz, "A_hat must be Hurwitz");
  return solve_lyapunov(a_hat.transpose(), Matrix::Identity(a_hat.rows(), a_hat.cols()));
}

ReducedGradient reduced_loss_gradient(const Matrix& a, const Matrix& b, const Matrix& d_meas,
                                      const Matrix& a_hat, const Matrix& b_hat,
                                      const Matrix& c_hat) {
  const int m = static_cast<int>(b.cols()) / 2;
  const Matrix jm = symplectic(m);
  const Matrix kmat = jm * d_meas.transpose();  // 2m x m

  ReducedGradient out;
  out.z = solve_lyapunov(a, b * jm * b.transpose());
  Eigen::PartialPivLU<Matrix> zlu(out.z);
  const Matrix x = -zlu.solve(b * kmat);  // C' = -Z^-1 B Jm D'
  out.c_meas = x.transpose();

  const Matrix xi = x - c_hat.transpose();
  const Matrix s = zlu.solve(xi) * out.c_meas;        // Z^-1 Xi C
  const Matrix y = solve_lyapunov(a.transpose(), s);  // adjoint Lyapunov solve
  const Matrix yskew = y.transpose() - y;

  out.grad_a = (a - a_hat) + yskew * out.z;
  out.grad_b = (b - b_hat) + yskew * b * jm + zlu.solve(xi * kmat.transpose());
  out.loss = loss(a, b, out.c_meas, a_hat, b_hat, c_hat);
  return out;
}

ProjectionResult reduced_projection(const ClassicalEstimate& target, const Matrix& d_meas,
                                    const std::optional<std::pair<Matrix, Matrix>>& init,
                                    const ReducedSolveOptions& opts) {
  require(is_hurwitz(target.a_hat), ErrorKind::NotHurwitz, "target A_hat must be Hurwitz");
  Matrix a = init ? init->first : target.a_hat;
  Matrix b = init ? init->second : target.b_hat;
  require(is_hurwitz(a), ErrorKind::NotHurwitz, "initial A must be Hurwitz");
  {
    const int n2 = static_cast<int>(a.rows());
    const int m = static_cast<int>(b.cols()) / 2;
    const Matrix jm = symplectic(m);
    auto det_z = [&](const Matrix& bb) {
      return std::abs(solve_lyapunov(a, bb * jm * bb.transpose()).determinant());
    };
    if (det_z(b) <= 1e-8 && !init && 2 * m >= n2) {
      // Overfit estimates carry nearly uncontrollable modes with a singular Z;
      // excite them along a symplectic identity template until Z is invertible.
      Matrix tmpl = Matrix::Zero(n2, 2 * m);
      tmpl.leftCols(n2) = Matrix::Identity(n2, n2);
      for (double s : {0.05, 0.1, 0.2, 0.4, 0.8, 1.6}) {
        const Matrix bs = b + s * tmpl;
        if (det_z(bs) > 1e-6) {
          b = bs;
          break;
        }
      }
    }
    require(det_z(b) > 1e-10, ErrorKind::ZSingularOnPath, "initial point has singular Z");
  }

  ReducedGradient g = reduced_loss_gradient(a, b, d_meas, target.a_hat, target.b_hat,
                                            target.c_hat);
  double step = 1.0 / (1.0 + g.grad_a.norm() + g.grad_b.norm());
  Matrix prev_a, prev_b, prev_ga, prev_gb;
  bool have_prev = false;
  int it = 0;
  for (; it < opts.max_iter; ++it) {
    const double gn2 = g.grad_a.squaredNorm() + g.grad_b.squaredNorm();
    if (std::sqrt(gn2) < opts.grad_tol * (1.0 + std::abs(g.loss))) break;

    if (have_prev) {  // Barzilai-Borwein step length
      const Matrix da = a - prev_a, db = b - prev_b;
      const Matrix dga = g.grad_a - prev_ga, dgb = g.grad_b - prev_gb;
      const double denom = (da.array() * dga.array()).sum() + (db.array() * dgb.array()).sum();
      if (denom > 1e-300)
        step = std::clamp((da.squaredNorm() + db.squaredNorm()) / denom, 1e-12, 1e6);
    }
    prev_a = a;
    prev_b = b;
    prev_ga = g.grad_a;
    prev_gb = g.grad_b;

    double t = step;
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt, t *= 0.5) {
      const Matrix an = a - t * g.grad_a;
      const Matrix bn = b - t * g.grad_b;
      if (!is_hurwitz(an)) continue;
      const int m = static_cast<int>(bn.cols()) / 2;
      const Matrix zn = solve_lyapunov(an, bn * symplectic(m) * bn.transpose());
      if (std::abs(zn.determinant()) <= 1e-10) continue;
      const Matrix cn = -(zn.partialPivLu().solve(bn * symplectic(m) * d_meas.transpose()))
                             .transpose();
      const double fn = loss(an, bn, cn, target.a_hat, target.b_hat, target.c_hat);
      if (fn <= g.loss - 1e-4 * t * gn2) {
        a = an;
        b = bn;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    g = reduced_loss_gradient(a, b, d_meas, target.a_hat, target.b_hat, target.c_hat);
  }

  ProjectionResult res;
  res.solver = SolverKind::reduced;
  res.iterations = it;
  res.loss = g.loss;
  res.gamma_final = g.loss;
  res.realization.a = a;
  res.realization.b = b;
  res.realization.c_meas = g.c_meas;
  res.realization.d_meas = d_meas;
  res.realization.z = g.z;
  auto [q, l] = recover_gain(a, b, g.c_meas, d_meas);
  res.realization.q = q;
  res.realization.l_gain = l;
  auto [r1, r2] = realizability_residual(a, b, g.c_meas, d_meas, g.z);
  res.residuals["constraint_i"] = r1;
  res.residuals["constraint_ii"] = r2;
  res.residuals["z_skew"] = (g.z + g.z.transpose()).norm();
  return res;
}

ProjectionResult bisection_identify(const ClassicalEstimate& target, const Matrix& d_meas,
                                    const BisectionOptions& opts) {
  require(is_hurwitz(target.a_hat), ErrorKind::NotHurwitz, "target A_hat must be Hurwitz");

  const ProjectionResult reduced = reduced_projection(target, d_meas);
  double gamma = opts.gamma0 > 0.0 ? opts.gamma0 : 2.0 * reduced.loss;
  if (gamma <= 0.0) gamma = 1e-8;

  LiftedProblem prob(target.a_hat, target.b_hat, target.c_hat, d_meas, gamma);

  // Warm-start factor point: the paper's G-hat from the target, or the
  // reduced solution when the caller asks for it.
  const int n2 = static_cast<int>(target.a_hat.rows());
  Matrix wa = target.a_hat, wb = target.b_hat, wc = target.c_hat;
  Matrix wz = symplectic(n2 / 2);
  Matrix wp = init_certificate(target.a_hat);
  if (opts.init_from_reduced) {
    wa = reduced.realization.a;
    wb = reduced.realization.b;
    wc = reduced.realization.c_meas;
    wz = reduced.realization.z;
    wp = init_certificate(wa);
  }

  std::optional<FeasiblePoint> best;
  double best_gamma = 0.0;
  int total_iterations = 0;
  for (int round = 0; round < opts.rounds; ++round) {
    prob.set_gamma(gamma);
    bool feasible = false;
    try {
      RankFeasibilityResult r =
          solve_rank_feasibility(prob, wa, wb, wc, wz, wp, opts.rank);
      total_iterations += r.iterations;
      feasible = r.feasible;
      if (r.feasible) {
        best = r.point;
        best_gamma = gamma;
        wa = r.point->a;
        wb = r.point->b;
        wc = r.point->c_meas;
        wz = r.point->z;
        wp = r.point->p;
      }
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::NumericalStall) throw;
      total_iterations += opts.rank.max_iter;
    }
    gamma *= feasible ? 0.5 : 1.2;
  }
  require(best.has_value(), ErrorKind::NoFeasiblePointFound, "every bisection round infeasible");

  ProjectionResult res;
  res.solver = SolverKind::lifted;
  res.iterations = total_iterations;
  res.gamma_final = best_gamma;
  res.loss = loss(best->a, best->b, best->c_meas, target.a_hat, target.b_hat, target.c_hat);
  res.realization.a = best->a;
  res.realization.b = best->b;
  res.realization.c_meas = best->c_meas;
  res.realization.d_meas = d_meas;
  res.realization.z = best->z;
  auto [q, l] = recover_gain(best->a, best->b, best->c_meas, d_meas);
  res.realization.q = q;
  res.realization.l_gain = l;
  auto [r1, r2] = realizability_residual(best->a, best->b, best->c_meas, d_meas, best->z);
  res.residuals["constraint_i"] = r1;
  res.residuals["constraint_ii"] = r2;
  res.residuals["z_skew"] = (best->z + best->z.transpose()).norm();
  return res;
}

std::pair<Matrix, Matrix> recover_gain(const Matrix& a, const Matrix& b, const Matrix& c_meas,
                                       const Matrix& d_meas) {
  const Matrix q = solve_filter_are(a, b, c_meas, d_meas);
  return {q, kalman_gain(q, b, c_meas, d_meas)};
}

QuantumRealization to_canonical(const QuantumRealization& real) {
  const Matrix v = skew_canonical_factor(real.z);
  Eigen::PartialPivLU<Matrix> vlu(v);
  QuantumRealization out;
  out.a = vlu.solve(real.a * v);
  out.b = vlu.solve(real.b);
  out.c_meas = real.c_meas * v;
  out.d_meas = real.d_meas;
  out.z = symplectic(real.modes());
  if (real.q.size() > 0) out.q = vlu.solve(vlu.solve(real.q).transpose()).transpose();
  if (real.l_gain.size() > 0) out.l_gain = vlu.solve(real.l_gain);
  return out;
}

}  // namespace qsysid
