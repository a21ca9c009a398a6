#include <Eigen/Eigenvalues>
#include <cmath>
#include <deque>
#include <vector>

#include "qsysid/errors.hpp"
#include "qsysid/numerics.hpp"
#include "qsysid/projection.hpp"

namespace qsysid {

namespace {

Matrix sym(const Matrix& x) { return 0.5 * (x + x.transpose()); }

Matrix clip_psd_min(const Matrix& x, double floor_val) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym(x));
  Vector w = es.eigenvalues().cwiseMax(floor_val);
  return es.eigenvectors() * w.asDiagonal() * es.eigenvectors().transpose();
}

Matrix clip_nsd(const Matrix& x) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym(x));
  Vector w = es.eigenvalues().cwiseMin(0.0);
  return es.eigenvectors() * w.asDiagonal() * es.eigenvectors().transpose();
}

double max_eig_sym(const Matrix& x) {
  return Eigen::SelfAdjointEigenSolver<Matrix>(sym(x), Eigen::EigenvaluesOnly)
      .eigenvalues()
      .maxCoeff();
}

double min_eig_sym(const Matrix& x) {
  return Eigen::SelfAdjointEigenSolver<Matrix>(sym(x), Eigen::EigenvaluesOnly)
      .eigenvalues()
      .minCoeff();
}

}  // namespace

LiftedProblem::LiftedProblem(const Matrix& a_hat, const Matrix& b_hat, const Matrix& c_hat,
                             const Matrix& d_meas, double gamma, double epsilon)
    : a_hat_(a_hat), b_hat_(b_hat), c_hat_(c_hat), d_meas_(d_meas), gamma_(gamma), eps_(epsilon) {
  require(epsilon > 0.0, ErrorKind::InvalidArgument, "epsilon must be positive");
  require(a_hat.rows() == a_hat.cols() && a_hat.rows() % 2 == 0, ErrorKind::DimensionMismatch,
          "A_hat must be 2n x 2n");
  require(is_hurwitz(a_hat), ErrorKind::NotHurwitz, "target A_hat must be Hurwitz");
  n_ = static_cast<int>(a_hat.rows()) / 2;
  require(b_hat.rows() == 2 * n_ && b_hat.cols() % 2 == 0, ErrorKind::DimensionMismatch,
          "B_hat must be 2n x 2m");
  m_ = static_cast<int>(b_hat.cols()) / 2;
  require(c_hat.rows() == m_ && c_hat.cols() == 2 * n_, ErrorKind::DimensionMismatch,
          "C_hat must be m x 2n");
  require(d_meas.rows() == m_ && d_meas.cols() == 2 * m_, ErrorKind::DimensionMismatch,
          "D_meas must be m x 2m");

  sz1_ = {2 * n_, 2 * n_, 2 * n_, 2 * m_, m_, 2 * n_, 2 * n_};
  sz2_ = {2 * m_, 2 * n_, 2 * n_};
  int acc = 0;
  for (int k = 0; k < 7; ++k) {
    off1_[k] = acc;
    acc += sz1_[k];
  }
  d1_ = acc;
  acc = 0;
  for (int k = 0; k < 3; ++k) {
    off2_[k] = acc;
    acc += sz2_[k];
  }
  d2_ = acc;

  jm_ = symplectic(m_);
  kmat_ = jm_ * d_meas_.transpose();
  trio_inv_ = (3.0 * Matrix::Identity(2 * m_, 2 * m_) + kmat_ * kmat_.transpose()).inverse();

  // Loss as a linear functional of G1: diagonal blocks (2,2), (4,4), (5,5)
  // carry I/2, blocks (2,1), (1,4), (5,1) carry the target matrices.
  Matrix w = Matrix::Zero(d1_, d1_);
  w.block(off1_[1], off1_[1], sz1_[1], sz1_[1]) = 0.5 * Matrix::Identity(sz1_[1], sz1_[1]);
  w.block(off1_[3], off1_[3], sz1_[3], sz1_[3]) = 0.5 * Matrix::Identity(sz1_[3], sz1_[3]);
  w.block(off1_[4], off1_[4], sz1_[4], sz1_[4]) = 0.5 * Matrix::Identity(sz1_[4], sz1_[4]);
  w.block(off1_[1], off1_[0], 2 * n_, 2 * n_) -= a_hat_;
  w.block(off1_[0], off1_[3], 2 * n_, 2 * m_) -= b_hat_;
  w.block(off1_[4], off1_[0], m_, 2 * n_) -= c_hat_;
  loss_weight_ = sym(w);
  loss_const_ = 0.5 * (a_hat_.squaredNorm() + b_hat_.squaredNorm() + c_hat_.squaredNorm());
  loss_weight_norm2_ = loss_weight_.squaredNorm();
}

Eigen::Block<const Matrix> LiftedProblem::block1(const Matrix& g1, int k, int l) const {
  return g1.block(off1_[k - 1], off1_[l - 1], sz1_[k - 1], sz1_[l - 1]);
}

Eigen::Block<const Matrix> LiftedProblem::block2(const Matrix& g2, int k, int l) const {
  return g2.block(off2_[k - 1], off2_[l - 1], sz2_[k - 1], sz2_[l - 1]);
}

void LiftedProblem::factor_point(const Matrix& a, const Matrix& b, const Matrix& c,
                                 const Matrix& z, const Matrix& p, Matrix* g1, Matrix* g2) const {
  Matrix f1(d1_, 2 * n_);
  f1.middleRows(off1_[0], 2 * n_) = Matrix::Identity(2 * n_, 2 * n_);
  f1.middleRows(off1_[1], 2 * n_) = a;
  f1.middleRows(off1_[2], 2 * n_) = a.transpose();
  f1.middleRows(off1_[3], 2 * m_) = b.transpose();
  f1.middleRows(off1_[4], m_) = c;
  f1.middleRows(off1_[5], 2 * n_) = z;
  f1.middleRows(off1_[6], 2 * n_) = p;
  *g1 = f1 * f1.transpose();

  Matrix f2(d2_, 2 * m_);
  f2.middleRows(off2_[0], 2 * m_) = Matrix::Identity(2 * m_, 2 * m_);
  f2.middleRows(off2_[1], 2 * n_) = b;
  f2.middleRows(off2_[2], 2 * n_) = b * jm_;
  *g2 = f2 * f2.transpose();
}

double LiftedProblem::lifted_loss(const Matrix& g1) const {
  return (loss_weight_.array() * g1.array()).sum() + loss_const_;
}

std::map<std::string, double> LiftedProblem::residuals(const Matrix& g1, const Matrix& g2) const {
  std::map<std::string, double> r;
  const int n2 = 2 * n_, m2 = 2 * m_;
  r["identity_1"] = (block1(g1, 1, 1) - Matrix::Identity(n2, n2)).norm();
  r["identity_2"] = (block2(g2, 1, 1) - Matrix::Identity(m2, m2)).norm();
  r["pair_a"] = (block1(g1, 1, 3) - block1(g1, 1, 2).transpose()).norm();
  r["pair_b"] = (block1(g1, 1, 4) - block2(g2, 2, 1)).norm();
  r["pair_bj"] = (block2(g2, 3, 1) - block2(g2, 2, 1) * jm_).norm();
  const Matrix p = block1(g1, 1, 7);
  r["p_symmetric"] = (p - p.transpose()).norm();
  r["p_positive"] = std::max(0.0, eps_ - min_eig_sym(p));
  r["constraint_i"] =
      (-block1(g1, 2, 6) + block1(g1, 6, 2) + block2(g2, 3, 2)).norm();
  r["constraint_ii"] = (block1(g1, 6, 5) + block1(g1, 1, 4) * kmat_).norm();
  const Matrix z = block1(g1, 1, 6);
  r["z_skew"] = (z + z.transpose()).norm();
  const Matrix h = block1(g1, 3, 7) + block1(g1, 7, 3) + eps_ * sym(p);
  r["hurwitz_lmi"] = std::max(0.0, max_eig_sym(h));
  r["loss_bound"] = std::max(0.0, lifted_loss(g1) - gamma_);
  r["psd_1"] = std::max(0.0, -min_eig_sym(g1));
  r["psd_2"] = std::max(0.0, -min_eig_sym(g2));
  {
    Eigen::SelfAdjointEigenSolver<Matrix> es(sym(g1), Eigen::EigenvaluesOnly);
    Vector w = es.eigenvalues().cwiseAbs();
    std::sort(w.data(), w.data() + w.size(), std::greater<double>());
    r["rank_1"] = w.tail(d1_ - n2).sum() / std::max(w(0), 1e-300);
  }
  {
    Eigen::SelfAdjointEigenSolver<Matrix> es(sym(g2), Eigen::EigenvaluesOnly);
    Vector w = es.eigenvalues().cwiseAbs();
    std::sort(w.data(), w.data() + w.size(), std::greater<double>());
    r["rank_2"] = w.tail(d2_ - m2).sum() / std::max(w(0), 1e-300);
  }
  return r;
}

// ---------------------------------------------------------------------------

class LiftedSolver {
 public:
  explicit LiftedSolver(const LiftedProblem& p) : p_(p) {}

  // Exact joint projection onto every affine equality: the constraint
  // footprints decouple into independent groups, and the coupled trio
  // {G1(1,4) = G2(2,1)', G2(3,1) = G2(2,1) Jm, G1(6,5) + G1(1,4) Jm D' = 0}
  // has the closed-form solution below.
  void project_affine(Matrix& g1, Matrix& g2) const {
    const int n2 = 2 * p_.n_, m2 = 2 * p_.m_, m = p_.m_;
    set1(g1, 1, 1, Matrix::Identity(n2, n2));
    set2(g2, 1, 1, Matrix::Identity(m2, m2));

    const Matrix b12 = p_.block1(g1, 1, 2);
    const Matrix b13 = p_.block1(g1, 1, 3);
    const Matrix xa = 0.5 * (b12 + b13.transpose());
    set1(g1, 1, 2, xa);
    set1(g1, 1, 3, xa.transpose());

    const Matrix x0 = p_.block1(g1, 1, 4);   // 2n x 2m
    const Matrix y0 = p_.block2(g2, 1, 2);   // 2m x 2n
    const Matrix w0 = p_.block2(g2, 1, 3);   // 2m x 2n
    const Matrix v0 = p_.block1(g1, 5, 6);   // m x 2n
    const Matrix y = p_.trio_inv_ * (x0.transpose() + y0 + p_.jm_ * w0 - p_.kmat_ * v0);
    set1(g1, 1, 4, y.transpose());
    set2(g2, 1, 2, y);
    set2(g2, 1, 3, -p_.jm_ * y);
    set1(g1, 5, 6, -p_.kmat_.transpose() * y);

    const Matrix b26 = p_.block1(g1, 2, 6);
    const Matrix b23 = p_.block2(g2, 2, 3);
    const Matrix m0 = -b26 + b26.transpose() + b23.transpose();
    const Matrix lam = (3.0 * m0 + 2.0 * m0.transpose()) / 5.0;
    set1(g1, 2, 6, b26 + lam - lam.transpose());
    set2(g2, 2, 3, b23 - lam.transpose());

    const Matrix z = p_.block1(g1, 1, 6);
    set1(g1, 1, 6, 0.5 * (z - z.transpose()));
    (void)m;
  }

  void project_p_cone(Matrix& g1, Matrix&) const {
    set1(g1, 1, 7, clip_psd_min(p_.block1(g1, 1, 7), p_.eps_));
  }

  // G1(3,7) + G1(7,3) + eps sym(G1(1,7)) <= 0, closed form since A A* = c I.
  void project_hurwitz_cone(Matrix& g1, Matrix&) const {
    const double eps = p_.eps_;
    const Matrix y = p_.block1(g1, 3, 7);
    const Matrix x = p_.block1(g1, 1, 7);
    const Matrix m0 = y + y.transpose() + eps * sym(x);
    const Matrix dpos = sym(m0) - clip_nsd(m0);
    const double c = 2.0 + 0.5 * eps * eps;
    set1(g1, 3, 7, y - dpos / c);
    set1(g1, 1, 7, x - (0.5 * eps) * dpos / c);
  }

  void project_loss_halfspace(Matrix& g1, Matrix&) const {
    const double v = p_.lifted_loss(g1) - p_.gamma_;
    if (v > 0.0) g1 -= (v / p_.loss_weight_norm2_) * p_.loss_weight_;
  }

  void project_psd1(Matrix& g1, Matrix&) const { g1 = project_psd(g1); }
  void project_psd2(Matrix&, Matrix& g2) const { g2 = project_psd(g2); }

  // Dykstra cycle over the convex sets, then rank truncation.
  void outer_step(Matrix& g1, Matrix& g2, int cycles) const {
    using Proj = void (LiftedSolver::*)(Matrix&, Matrix&) const;
    static constexpr Proj kSets[] = {
        &LiftedSolver::project_affine_wrap, &LiftedSolver::project_p_cone,
        &LiftedSolver::project_hurwitz_cone, &LiftedSolver::project_loss_halfspace,
        &LiftedSolver::project_psd1, &LiftedSolver::project_psd2};
    constexpr int kNumSets = static_cast<int>(std::size(kSets));
    std::vector<Matrix> c1(kNumSets, Matrix::Zero(p_.d1_, p_.d1_));
    std::vector<Matrix> c2(kNumSets, Matrix::Zero(p_.d2_, p_.d2_));
    for (int cyc = 0; cyc < cycles; ++cyc) {
      for (int s = 0; s < kNumSets; ++s) {
        g1 += c1[s];
        g2 += c2[s];
        const Matrix h1 = g1, h2 = g2;
        (this->*kSets[s])(g1, g2);
        c1[s] = h1 - g1;
        c2[s] = h2 - g2;
      }
    }
    g1 = project_psd_rank(g1, 2 * p_.n_);
    g2 = project_psd_rank(g2, 2 * p_.m_);
  }

  void project_affine_wrap(Matrix& g1, Matrix& g2) const { project_affine(g1, g2); }

  // Reads the variables, restores exact realizability (Z from the Lyapunov
  // equation, C from constraint II, P rescaled so both LMIs hold) and accepts
  // when the restored point meets the loss bound.
  std::optional<FeasiblePoint> certificate(const Matrix& g1, const Matrix& g2) const {
    const Matrix a = 0.5 * (p_.block1(g1, 2, 1) + p_.block1(g1, 1, 3));
    const Matrix b = 0.5 * (p_.block1(g1, 1, 4) + p_.block2(g2, 2, 1));
    if (!is_hurwitz(a)) return std::nullopt;
    Matrix z;
    try {
      z = solve_lyapunov(a, b * p_.jm_ * b.transpose());
    } catch (const Error&) {
      return std::nullopt;
    }
    if (std::abs(z.determinant()) <= 1e-10) return std::nullopt;
    const Matrix c = -(z.partialPivLu().solve(b * p_.kmat_)).transpose();
    const double f = loss(a, b, c, p_.a_hat_, p_.b_hat_, p_.c_hat_);
    // The alternation limit saturates the loss bound exactly; a hairline
    // relative slack keeps boundary points certifiable.
    if (f > p_.gamma_ * (1.0 + 1e-4) + 1e-15) return std::nullopt;
    Matrix p0;
    try {
      p0 = solve_lyapunov(a.transpose(), Matrix::Identity(a.rows(), a.cols()));
    } catch (const Error&) {
      return std::nullopt;
    }
    p0 = sym(p0);
    // A' P + P A = -I <= -eps P requires lambda_max(P) <= 1/eps; P >= eps I
    // is then arranged by scaling.
    if (max_eig_sym(p0) > 1.0 / p_.eps_) return std::nullopt;
    const double lo = min_eig_sym(p0);
    if (lo < p_.eps_) p0 *= p_.eps_ / lo;
    if (max_eig_sym(p0) > 1.0 / p_.eps_) return std::nullopt;
    return FeasiblePoint{a, b, c, z, p0, f};
  }

 private:
  void set1(Matrix& g, int k, int l, const Matrix& v) const {
    g.block(p_.off1_[k - 1], p_.off1_[l - 1], p_.sz1_[k - 1], p_.sz1_[l - 1]) = v;
    if (k != l)
      g.block(p_.off1_[l - 1], p_.off1_[k - 1], p_.sz1_[l - 1], p_.sz1_[k - 1]) = v.transpose();
  }
  void set2(Matrix& g, int k, int l, const Matrix& v) const {
    g.block(p_.off2_[k - 1], p_.off2_[l - 1], p_.sz2_[k - 1], p_.sz2_[l - 1]) = v;
    if (k != l)
      g.block(p_.off2_[l - 1], p_.off2_[k - 1], p_.sz2_[l - 1], p_.sz2_[k - 1]) = v.transpose();
  }

  const LiftedProblem& p_;
};

RankFeasibilityResult solve_rank_feasibility(const LiftedProblem& prob, const Matrix& a0,
                                             const Matrix& b0, const Matrix& c0, const Matrix& z0,
                                             const Matrix& p0, const RankSolveOptions& opts) {
  LiftedSolver solver(prob);
  RankFeasibilityResult res;
  prob.factor_point(a0, b0, c0, z0, p0, &res.g1, &res.g2);

  auto scale = [&](const Matrix& g1) {
    double s = 1.0;
    for (int k = 1; k <= 7; ++k) s += prob.block1(g1, 1, k).norm();
    return s;
  };
  auto max_residual = [&](const Matrix& g1, const Matrix& g2) {
    double mx = 0.0;
    for (const auto& [name, v] : prob.residuals(g1, g2)) mx = std::max(mx, v);
    return mx;
  };

  if (auto cert = solver.certificate(res.g1, res.g2)) {
    prob.factor_point(cert->a, cert->b, cert->c_meas, cert->z, cert->p, &res.g1, &res.g2);
    res.feasible = true;
    res.point = cert;
    res.residuals = prob.residuals(res.g1, res.g2);
    return res;
  }

  const long vec1 = static_cast<long>(prob.g1_dim()) * prob.g1_dim();
  const long vec2 = static_cast<long>(prob.g2_dim()) * prob.g2_dim();
  auto pack = [&](const Matrix& g1, const Matrix& g2) {
    Vector v(vec1 + vec2);
    v.head(vec1) = Eigen::Map<const Vector>(g1.data(), vec1);
    v.tail(vec2) = Eigen::Map<const Vector>(g2.data(), vec2);
    return v;
  };
  auto unpack = [&](const Vector& v, Matrix& g1, Matrix& g2) {
    g1 = Eigen::Map<const Matrix>(v.data(), prob.g1_dim(), prob.g1_dim());
    g2 = Eigen::Map<const Matrix>(v.data() + vec1, prob.g2_dim(), prob.g2_dim());
  };

  std::deque<Vector> xs, fs;
  double best = std::numeric_limits<double>::infinity();
  int since_best = 0;
  int restarts = 0;

  for (int it = 0; it < opts.max_iter; ++it) {
    const Vector xk = pack(res.g1, res.g2);
    // Tighten the inner projection near convergence: certificate extraction
    // amplifies read errors through Z^-1, so the endgame needs extra accuracy.
    const int cycles = best < 100.0 * opts.tol ? 3 * opts.dykstra_cycles : opts.dykstra_cycles;
    solver.outer_step(res.g1, res.g2, cycles);
    if (auto cert = solver.certificate(res.g1, res.g2)) {
      prob.factor_point(cert->a, cert->b, cert->c_meas, cert->z, cert->p, &res.g1, &res.g2);
      res.feasible = true;
      res.iterations = it + 1;
      res.point = cert;
      res.residuals = prob.residuals(res.g1, res.g2);
      return res;
    }
    const double mx = max_residual(res.g1, res.g2);
    const double rel = mx / scale(res.g1);
    if (rel < best - 1e-14) {
      best = rel;
      since_best = 0;
    } else if (++since_best > opts.stall_window) {
      since_best = 0;
      if (restarts++ < 3) {  // clear the acceleration history and retry
        xs.clear();
        fs.clear();
        best = std::numeric_limits<double>::infinity();
      } else {
        res.iterations = it + 1;
        if (rel <= opts.tol) break;  // converged in G, no certificate: treat as infeasible
        res.residuals = prob.residuals(res.g1, res.g2);
        fail(ErrorKind::NumericalStall, "residual frozen above tolerance");
      }
    }

    if (opts.anderson_memory > 0) {
      xs.push_back(xk);
      fs.push_back(pack(res.g1, res.g2) - xk);
      if (static_cast<int>(xs.size()) > opts.anderson_memory) {
        xs.pop_front();
        fs.pop_front();
      }
      const int h = static_cast<int>(xs.size());
      if (h >= 2) {
        Matrix df(fs.back().size(), h - 1);
        for (int i = 0; i < h - 1; ++i) df.col(i) = fs[i] - fs.back();
        const Vector theta = df.bdcSvd(Eigen::ComputeThinU | Eigen::ComputeThinV)
                                 .solve(-fs.back());
        Vector xacc = xs.back() + fs.back();
        for (int i = 0; i < h - 1; ++i)
          xacc += theta(i) * ((xs[i] - xs.back()) + (fs[i] - fs.back()));
        Matrix g1a, g2a;
        unpack(xacc, g1a, g2a);
        if (max_residual(g1a, g2a) < mx * 1.02) {
          res.g1 = g1a;
          res.g2 = g2a;
          if (auto cert = solver.certificate(res.g1, res.g2)) {
            prob.factor_point(cert->a, cert->b, cert->c_meas, cert->z, cert->p, &res.g1, &res.g2);
            res.feasible = true;
            res.iterations = it + 1;
            res.point = cert;
            res.residuals = prob.residuals(res.g1, res.g2);
            return res;
          }
        }
      }
    }
  }
  res.feasible = false;
  if (res.iterations == 0) res.iterations = opts.max_iter;
  res.residuals = prob.residuals(res.g1, res.g2);
  return res;
}

}  // namespace qsysid
