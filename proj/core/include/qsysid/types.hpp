#pragma once

#include <Eigen/Dense>

namespace qsysid {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using ComplexMatrix = Eigen::MatrixXcd;

/// 2x2 symplectic unit J = [[0,1],[-1,0]].
inline Matrix symplectic_unit() {
  Matrix j(2, 2);
  j << 0.0, 1.0, -1.0, 0.0;
  return j;
}

/// Block-diagonal symplectic form J_n = I_n (x) J, a 2n x 2n matrix.
inline Matrix symplectic(int n) {
  Matrix jn = Matrix::Zero(2 * n, 2 * n);
  for (int k = 0; k < n; ++k) {
    jn(2 * k, 2 * k + 1) = 1.0;
    jn(2 * k + 1, 2 * k) = -1.0;
  }
  return jn;
}

inline double frob(const Matrix& m) { return m.norm(); }

inline double max_real_eig(const Matrix& a) {
  return Eigen::EigenSolver<Matrix>(a, false).eigenvalues().real().maxCoeff();
}

inline bool is_hurwitz(const Matrix& a, double thresh = -1e-12) {
  return max_real_eig(a) < thresh;
}

}  // namespace qsysid
