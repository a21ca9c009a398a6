#pragma once

#include <random>

#include "qsysid/types.hpp"

namespace qsysid::testutil {

// Brute-force Lyapunov oracle: assemble the Kronecker system with explicit
// index loops and solve it by hand-rolled Gaussian elimination. Kept fully
// independent of the library's solver path.
inline Matrix lyapunov_bruteforce(const Matrix& a, const Matrix& w) {
  const int d = static_cast<int>(a.rows());
  const int n = d * d;
  std::vector<std::vector<double>> k(n, std::vector<double>(n + 1, 0.0));
  // vec is column-major: entry (i, j) of X sits at index i + j * d.
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      const int row = i + j * d;
      for (int l = 0; l < d; ++l) {
        k[row][l + j * d] += a(i, l);  // (A X)_{ij}
        k[row][i + l * d] += a(j, l);  // (X A')_{ij}
      }
      k[row][n] = -w(i, j);
    }
  for (int col = 0; col < n; ++col) {
    int piv = col;
    for (int r = col + 1; r < n; ++r)
      if (std::abs(k[r][col]) > std::abs(k[piv][col])) piv = r;
    std::swap(k[col], k[piv]);
    for (int r = 0; r < n; ++r) {
      if (r == col || k[r][col] == 0.0) continue;
      const double f = k[r][col] / k[col][col];
      for (int c = col; c <= n; ++c) k[r][c] -= f * k[col][c];
    }
  }
  Matrix x(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) x(i, j) = k[i + j * d][n] / k[i + j * d][i + j * d];
  return x;
}

inline Matrix random_matrix(std::mt19937_64& gen, int rows, int cols, double scale = 1.0) {
  std::normal_distribution<double> dist(0.0, scale);
  Matrix m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = dist(gen);
  return m;
}

// Random Hurwitz matrix: random part shifted left of the imaginary axis.
inline Matrix random_hurwitz(std::mt19937_64& gen, int d, double margin = 0.5) {
  Matrix r = random_matrix(gen, d, d);
  const double shift = max_real_eig(r);
  return r - (shift + margin) * Matrix::Identity(d, d);
}

inline Matrix random_skew_invertible(std::mt19937_64& gen, int d) {
  for (;;) {
    Matrix r = random_matrix(gen, d, d);
    Matrix z = 0.5 * (r - r.transpose());
    if (std::abs(z.determinant()) > 1e-4) return z;
  }
}

}  // namespace qsysid::testutil
