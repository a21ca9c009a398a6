#include "qsysid/numerics.hpp"

#include <Eigen/Eigenvalues>
#include <complex>

#include "qsysid/errors.hpp"

namespace qsysid {

namespace {

// Kronecker linear system (I (x) A + A (x) I) vec(X) = -vec(W), column-major vec.
Matrix lyapunov_kron(const Matrix& a, const Matrix& w) {
  const int d = static_cast<int>(a.rows());
  Matrix k = Matrix::Zero(d * d, d * d);
  for (int j = 0; j < d; ++j)
    k.block(j * d, j * d, d, d) += a;  // I (x) A
  for (int j = 0; j < d; ++j)
    for (int l = 0; l < d; ++l)
      for (int i = 0; i < d; ++i)
        k(j * d + i, l * d + i) += a(j, l);  // A (x) I
  Vector rhs(d * d);
  for (int j = 0; j < d; ++j) rhs.segment(j * d, d) = -w.col(j);
  Vector x = k.partialPivLu().solve(rhs);
  Matrix out(d, d);
  for (int j = 0; j < d; ++j) out.col(j) = x.segment(j * d, d);
  return out;
}

// Bartels-Stewart via complex Schur: T Y + Y T^H = C solved column-wise.
Matrix lyapunov_schur(const Matrix& a, const Matrix& w) {
  const int d = static_cast<int>(a.rows());
  Eigen::ComplexSchur<Matrix> schur(a);
  const ComplexMatrix& u = schur.matrixU();
  const ComplexMatrix& t = schur.matrixT();
  ComplexMatrix c = -u.adjoint() * w.cast<std::complex<double>>() * u;
  ComplexMatrix y = ComplexMatrix::Zero(d, d);
  for (int k = d - 1; k >= 0; --k) {
    ComplexMatrix rhs = c.col(k);
    for (int j = k + 1; j < d; ++j) rhs -= std::conj(t(k, j)) * y.col(j);
    ComplexMatrix tk = t + std::conj(t(k, k)) * ComplexMatrix::Identity(d, d);
    y.col(k) = tk.triangularView<Eigen::Upper>().solve(rhs);
  }
  return (u * y * u.adjoint()).real();
}

void check_square_same(const Matrix& a, const Matrix& w) {
  require(a.rows() == a.cols(), ErrorKind::DimensionMismatch, "A must be square");
  require(w.rows() == a.rows() && w.cols() == a.cols(), ErrorKind::DimensionMismatch,
          "W must match A");
}

// Swaps adjacent diagonal entries k, k+1 of a triangular complex Schur pair.
void swap_schur_entries(ComplexMatrix& t, ComplexMatrix& u, int k) {
  using C = std::complex<double>;
  const C a = t(k, k), b = t(k, k + 1), c = t(k + 1, k + 1);
  // Unit eigenvector of [[a,b],[0,c]] for eigenvalue c.
  C v0 = b, v1 = c - a;
  double nrm = std::sqrt(std::norm(v0) + std::norm(v1));
  if (nrm < 1e-300) return;  // identical entries, nothing to swap
  v0 /= nrm;
  v1 /= nrm;
  ComplexMatrix g(2, 2);
  g << v0, -std::conj(v1), v1, std::conj(v0);
  const int d = static_cast<int>(t.rows());
  t.block(k, 0, 2, d) = g.adjoint() * t.block(k, 0, 2, d);
  t.block(0, k, d, 2) = t.block(0, k, d, 2) * g;
  u.block(0, k, d, 2) = u.block(0, k, d, 2) * g;
  t(k + 1, k) = 0.0;
}

}  // namespace

Matrix solve_lyapunov(const Matrix& a, const Matrix& w) {
  check_square_same(a, w);
  require(is_hurwitz(a), ErrorKind::NotHurwitz, "A has an eigenvalue with real part >= -1e-12");
  Matrix x = (a.rows() <= 12) ? lyapunov_kron(a, w) : lyapunov_schur(a, w);
  // One iterative-refinement pass keeps the residual near machine precision.
  Matrix r = a * x + x * a.transpose() + w;
  x += (a.rows() <= 12) ? lyapunov_kron(a, r) : lyapunov_schur(a, r);
  return x;
}

Matrix solve_filter_are(const Matrix& a, const Matrix& b, const Matrix& c_meas,
                        const Matrix& d_meas) {
  const int d = static_cast<int>(a.rows());
  const int m = static_cast<int>(c_meas.rows());
  require(a.rows() == a.cols(), ErrorKind::DimensionMismatch, "A must be square");
  require(b.rows() == d, ErrorKind::DimensionMismatch, "B row count");
  require(c_meas.cols() == d, ErrorKind::DimensionMismatch, "C_meas column count");
  require(d_meas.rows() == m && d_meas.cols() == b.cols(), ErrorKind::DimensionMismatch,
          "D_meas shape");
  require(is_hurwitz(a), ErrorKind::NotHurwitz, "A must be Hurwitz");

  const Matrix r = d_meas * d_meas.transpose();
  {
    Eigen::JacobiSVD<Matrix> svd(r);
    const auto& sv = svd.singularValues();
    const double lo = sv(sv.size() - 1);
    require(lo > 1e-12 * std::max(1.0, sv(0)) && sv(0) / lo < 1e12, ErrorKind::SingularNoise,
            "D D' is near singular");
  }
  const Matrix ri = r.inverse();
  const Matrix s = b * d_meas.transpose();
  const Matrix at = a - s * ri * c_meas;
  const Matrix g = c_meas.transpose() * ri * c_meas;
  const Matrix wt = b * b.transpose() - s * ri * s.transpose();

  // Hamiltonian of the equivalent control-form ARE.
  Matrix ham(2 * d, 2 * d);
  ham << at.transpose(), -g, -wt, -at;

  Eigen::ComplexSchur<Matrix> schur(ham);
  ComplexMatrix t = schur.matrixT();
  ComplexMatrix u = schur.matrixU();
  // Bubble the stable eigenvalues into the leading d positions.
  for (int pass = 0; pass < 2 * d; ++pass) {
    bool moved = false;
    for (int k = 0; k < 2 * d - 1; ++k) {
      if (t(k, k).real() >= 0.0 && t(k + 1, k + 1).real() < 0.0) {
        swap_schur_entries(t, u, k);
        moved = true;
      }
    }
    if (!moved) break;
  }
  int stable = 0;
  for (int k = 0; k < 2 * d; ++k)
    if (t(k, k).real() < 0.0) ++stable;
  require(stable == d, ErrorKind::NoStabilizingSolution,
          "Hamiltonian has eigenvalues on the imaginary axis");

  ComplexMatrix u1 = u.topLeftCorner(d, d);
  ComplexMatrix u2 = u.bottomLeftCorner(d, d);
  Eigen::FullPivLU<ComplexMatrix> lu(u1);
  require(lu.isInvertible(), ErrorKind::NoStabilizingSolution, "singular invariant subspace basis");
  Matrix q = (u2 * lu.inverse()).real();
  q = 0.5 * (q + q.transpose());

  // Newton refinement: solve the closed-loop Lyapunov equation for the correction.
  for (int it = 0; it < 2; ++it) {
    Matrix f = at * q + q * at.transpose() - q * g * q + wt;
    double bound = 1e-10 * (1.0 + frob(b * b.transpose()));
    if (frob(f) <= bound) break;
    Matrix acl = at - q * g;
    require(is_hurwitz(acl, 0.0), ErrorKind::NoStabilizingSolution,
            "closed loop not stable during refinement");
    q += solve_lyapunov(acl, f);
    q = 0.5 * (q + q.transpose());
  }
  Matrix acl = at - q * g;
  require(is_hurwitz(acl, 0.0), ErrorKind::NoStabilizingSolution, "solution is not stabilizing");
  return q;
}

Matrix kalman_gain(const Matrix& q, const Matrix& b, const Matrix& c_meas,
                   const Matrix& d_meas) {
  require(q.rows() == q.cols() && q.rows() == c_meas.cols(), ErrorKind::DimensionMismatch,
          "Q / C_meas shapes");
  require(b.rows() == q.rows() && b.cols() == d_meas.cols() && d_meas.rows() == c_meas.rows(),
          ErrorKind::DimensionMismatch, "B / D_meas shapes");
  return q * c_meas.transpose() + b * d_meas.transpose();
}

std::vector<Matrix> integrate_rde(const Matrix& q0, const Matrix& a, const Matrix& b,
                                  const Matrix& c_meas, const Matrix& d_meas,
                                  double t_end, double dt) {
  require(dt > 0, ErrorKind::InvalidArgument, "dt must be positive");
  const Matrix r = d_meas * d_meas.transpose();
  const Matrix ri = r.inverse();
  const Matrix s = b * d_meas.transpose();
  const Matrix w = b * b.transpose();
  auto f = [&](const Matrix& q) -> Matrix {
    Matrix l = q * c_meas.transpose() + s;
    return a * q + q * a.transpose() + w - l * ri * l.transpose();
  };
  const int nsteps = static_cast<int>(std::llround(t_end / dt));
  std::vector<Matrix> traj;
  traj.reserve(nsteps + 1);
  Matrix q = 0.5 * (q0 + q0.transpose());
  traj.push_back(q);
  for (int k = 0; k < nsteps; ++k) {
    Matrix k1 = f(q);
    Matrix k2 = f(q + 0.5 * dt * k1);
    Matrix k3 = f(q + 0.5 * dt * k2);
    Matrix k4 = f(q + dt * k3);
    q += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    q = 0.5 * (q + q.transpose());
    require(frob(q) < 1e12, ErrorKind::Blowup, "RDE state norm exceeded 1e12");
    traj.push_back(q);
  }
  return traj;
}

Matrix skew_canonical_factor(const Matrix& z) {
  const int d = static_cast<int>(z.rows());
  require(d == z.cols() && d % 2 == 0, ErrorKind::DimensionMismatch, "Z must be 2n x 2n");
  require(frob(z + z.transpose()) <= 1e-8 * (1.0 + frob(z)), ErrorKind::NotSkew,
          "Z is not skew-symmetric");
  require(std::abs(z.determinant()) > 1e-10, ErrorKind::SingularZ, "det(Z) below 1e-10");

  const Matrix zs = 0.5 * (z - z.transpose());
  Eigen::RealSchur<Matrix> schur(zs);
  const Matrix& t = schur.matrixT();
  const Matrix& u = schur.matrixU();

  // Skewness forces the Schur form to be block diagonal with 2x2 blocks
  // [[0, s], [-s, 0]]; collect (column index, s) pairs.
  std::vector<std::pair<int, double>> blocks;
  int k = 0;
  while (k < d) {
    if (k + 1 < d && std::abs(t(k + 1, k)) > 1e-14) {
      blocks.emplace_back(k, 0.5 * (t(k, k + 1) - t(k + 1, k)));
      k += 2;
    } else {
      fail(ErrorKind::SingularZ, "zero eigenvalue block in Schur form");
    }
  }
  std::sort(blocks.begin(), blocks.end(),
            [](const auto& x, const auto& y) { return std::abs(x.second) > std::abs(y.second); });

  Matrix v(d, d);
  for (int c = 0; c < d / 2; ++c) {
    auto [col, sigma] = blocks[c];
    Vector u1 = u.col(col), u2 = u.col(col + 1);
    if (sigma < 0) {
      std::swap(u1, u2);
      sigma = -sigma;
    }
    const double root = std::sqrt(sigma);
    v.col(2 * c) = root * u1;
    v.col(2 * c + 1) = root * u2;
  }
  return v;
}

Matrix project_psd_rank(const Matrix& m, int k) {
  const int d = static_cast<int>(m.rows());
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.transpose()));
  const Vector& w = es.eigenvalues();  // ascending
  Matrix out = Matrix::Zero(d, d);
  for (int i = d - 1; i >= std::max(0, d - k); --i) {
    if (w(i) <= 0) break;
    out += w(i) * es.eigenvectors().col(i) * es.eigenvectors().col(i).transpose();
  }
  return out;
}

Matrix project_psd(const Matrix& m) { return project_psd_rank(m, static_cast<int>(m.rows())); }

}  // namespace qsysid
