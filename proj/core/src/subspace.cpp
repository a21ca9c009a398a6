#include "qsysid/subspace.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <unsupported/Eigen/MatrixFunctions>

#include "qsysid/errors.hpp"

namespace qsysid {

namespace {

// Ridge-regularized least squares: solves X * M = Y for X given row-space M.
Matrix solve_rows(const Matrix& y, const Matrix& m, double ridge_scale) {
  Matrix gram = m * m.transpose();
  const double ridge = ridge_scale * gram.trace() / static_cast<double>(gram.rows())
                       + 1e-300;
  gram += ridge * Matrix::Identity(gram.rows(), gram.cols());
  return gram.ldlt().solve(m * y.transpose()).transpose();
}

// Oblique projection of zf along the row space of uf onto the row space of wp.
Matrix oblique_projection(const Matrix& zf, const Matrix& wp, const Matrix& uf,
                          double ridge_scale) {
  Matrix reg(wp.rows() + uf.rows(), wp.cols());
  reg << wp, uf;
  const Matrix coeffs = solve_rows(zf, reg, ridge_scale);
  return coeffs.leftCols(wp.rows()) * wp;
}

Matrix hankel_of(const Matrix& x, int first_row, int block_rows, int j) {
  const int c = static_cast<int>(x.cols());
  Matrix h(block_rows * c, j);
  for (int r = 0; r < block_rows; ++r)
    h.middleRows(r * c, c) = x.middleRows(first_row + r, j).transpose();
  return h;
}

// Discrete filter Riccati fixed point for the one-step predictor gain.
Matrix discrete_predictor_gain(const Matrix& a, const Matrix& c, const Matrix& qw,
                               const Matrix& sw, const Matrix& re, Matrix* innov_cov) {
  const int d = static_cast<int>(a.rows());
  Matrix p = Matrix::Zero(d, d);
  for (int it = 0; it < 5000; ++it) {
    const Matrix t = a * p * c.transpose() + sw;
    const Matrix ic = c * p * c.transpose() + re;
    const Matrix pn = a * p * a.transpose() + qw - t * ic.ldlt().solve(t.transpose());
    const double delta = (pn - p).norm();
    p = 0.5 * (pn + pn.transpose());
    if (delta < 1e-12 * (1.0 + p.norm())) break;
  }
  const Matrix ic = c * p * c.transpose() + re;
  if (innov_cov) *innov_cov = ic;
  return (a * p * c.transpose() + sw) * ic.inverse();
}

}  // namespace

Matrix remove_feedthrough(const MeasurementRecord& rec, const Matrix& d_meas) {
  require(d_meas.rows() == rec.channels() && d_meas.cols() == rec.inputs.channels(),
          ErrorKind::DimensionMismatch, "D_meas shape vs record");
  return rec.ydot - rec.inputs.samples * d_meas.transpose();
}

HankelSet build_hankel(const Matrix& u, const Matrix& z, int block_rows) {
  const int n = static_cast<int>(u.rows());
  require(z.rows() == n, ErrorKind::DimensionMismatch, "input/output length mismatch");
  const int j = n - 2 * block_rows + 1;
  require(j >= 1, ErrorKind::InsufficientData, "record shorter than 2i samples");
  HankelSet hs;
  hs.columns = j;
  hs.u_past = hankel_of(u, 0, block_rows, j);
  hs.u_future = hankel_of(u, block_rows, block_rows, j);
  hs.z_past = hankel_of(z, 0, block_rows, j);
  hs.z_future = hankel_of(z, block_rows, block_rows, j);
  return hs;
}

ClassicalEstimate n4sid_estimate(const MeasurementRecord& rec, int order, const Matrix& d_meas,
                                 const HankelConfig& cfg) {
  require(order >= 1, ErrorKind::InvalidArgument, "order must be >= 1");
  const int nx = 2 * order;
  const int i = cfg.block_rows;
  require(i >= order + 1, ErrorKind::InvalidArgument, "block rows must exceed the order");
  const int n_samples = rec.count();
  require(n_samples >= 2 * i + 10 * nx, ErrorKind::InsufficientData,
          "need at least 2i + 20n samples");
  const int m = rec.channels();
  const int nu = rec.inputs.channels();

  const Matrix z = remove_feedthrough(rec, d_meas);
  const Matrix& u = rec.inputs.samples;

  const int j = n_samples - 2 * i + 1;
  const Matrix up = hankel_of(u, 0, i, j);
  const Matrix uf = hankel_of(u, i, i, j);
  const Matrix zp = hankel_of(z, 0, i, j);
  const Matrix zf = hankel_of(z, i, i, j);
  Matrix wp(up.rows() + zp.rows(), j);
  wp << up, zp;

  const Matrix oi = oblique_projection(zf, wp, uf, cfg.regularization);

  Eigen::BDCSVD<Matrix> svd(oi / std::sqrt(static_cast<double>(j)),
                            Eigen::ComputeThinU | Eigen::ComputeThinV);
  ClassicalEstimate est;
  est.sing_values = svd.singularValues();
  est.order = order;
  est.ts = rec.ts;

  const Matrix u1 = svd.matrixU().leftCols(nx);
  const Vector s1 = svd.singularValues().head(nx);
  const double j4 = std::pow(static_cast<double>(j), 0.25);
  const Matrix gamma = u1 * s1.cwiseSqrt().asDiagonal() * j4;  // extended observability

  // Shifted projection with the past extended by one block.
  const Matrix upp = hankel_of(u, 0, i + 1, j);
  const Matrix zpp = hankel_of(z, 0, i + 1, j);
  Matrix wpp(upp.rows() + zpp.rows(), j);
  wpp << upp, zpp;
  const Matrix ufm = hankel_of(u, i + 1, i - 1, j);
  const Matrix zfm = hankel_of(z, i + 1, i - 1, j);
  const Matrix oim = oblique_projection(zfm, wpp, ufm, cfg.regularization);

  const auto pinv_solve = [](const Matrix& g, const Matrix& rhs) -> Matrix {
    return (g.transpose() * g).ldlt().solve(g.transpose() * rhs);
  };
  const Matrix xi = pinv_solve(gamma, oi);                     // states at time i
  const Matrix xip = pinv_solve(gamma.topRows((i - 1) * m), oim);  // states at time i+1

  const Matrix uii = u.middleRows(i, j).transpose();
  const Matrix zii = z.middleRows(i, j).transpose();

  Matrix reg(nx + nu, j);
  reg << xi, uii;
  const Matrix ab = solve_rows(xip, reg, 1e-12);
  const Matrix a_d = ab.leftCols(nx);
  const Matrix b_d = ab.rightCols(nu);
  const Matrix c_d = solve_rows(zii, xi, 1e-12);

  const Matrix rho = xip - a_d * xi - b_d * uii;
  const Matrix eps = zii - c_d * xi;
  const double jd = static_cast<double>(j);
  const Matrix qw = rho * rho.transpose() / jd;
  const Matrix sw = rho * eps.transpose() / jd;
  const Matrix re = eps * eps.transpose() / jd;

  Matrix innov_cov;
  const Matrix k_d = discrete_predictor_gain(a_d, c_d, qw, sw, re, &innov_cov);
  est.innov_cov = innov_cov;

  const ContinuousPair cp = d2c(a_d, b_d, rec.ts);
  est.a_hat = cp.a;
  est.b_hat = cp.b;
  est.c_hat = c_d;
  // Match the discrete innovation recursion to the continuous convention:
  // K_d eps_k = L sqrt(Ts) w_k with eps_k = (D D') w_k / sqrt(Ts).
  est.l_hat = k_d * (d_meas * d_meas.transpose()) / rec.ts;
  est.stable = is_hurwitz(est.a_hat);
  return est;
}

std::vector<double> relative_energy(const Vector& sing_values) {
  require(sing_values.size() >= 2, ErrorKind::InvalidArgument, "need at least one pair");
  std::vector<double> scores;
  for (int k = 0; 2 * k + 1 < sing_values.size(); ++k) {
    const double s1 = sing_values(2 * k);
    const double s2 = sing_values(2 * k + 1);
    scores.push_back(std::log10(s1 * s1 + s2 * s2 + 1e-300));
  }
  return scores;
}

ContinuousPair d2c(const Matrix& a_d, const Matrix& b_d, double ts) {
  require(ts > 0, ErrorKind::InvalidArgument, "Ts must be positive");
  require(a_d.rows() == a_d.cols() && b_d.rows() == a_d.rows(), ErrorKind::DimensionMismatch,
          "A_d square, B_d row-conformant");
  const auto eig = Eigen::EigenSolver<Matrix>(a_d, false).eigenvalues();
  for (int k = 0; k < eig.size(); ++k) {
    const auto lam = eig(k);
    require(!(lam.real() <= 0.0 && std::abs(lam.imag()) <= 1e-12 * (1.0 + std::abs(lam.real()))),
            ErrorKind::LogUndefined, "A_d has an eigenvalue on the closed negative real axis");
  }
  ContinuousPair cp;
  cp.a = a_d.log() / ts;
  cp.b = cp.a * (a_d - Matrix::Identity(a_d.rows(), a_d.cols())).partialPivLu().solve(b_d);
  return cp;
}

}  // namespace qsysid
