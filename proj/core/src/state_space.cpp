#include "qsysid/state_space.hpp"

#include <cmath>

#include "qsysid/errors.hpp"

namespace qsysid {

void StateSpace::validate() const {
  require(n > 0 && m > 0, ErrorKind::DimensionMismatch, "n and m must be positive");
  require(a.rows() == 2 * n && a.cols() == 2 * n, ErrorKind::DimensionMismatch, "A is 2n x 2n");
  require(b.rows() == 2 * n && b.cols() == 2 * m, ErrorKind::DimensionMismatch, "B is 2n x 2m");
  require(c.rows() == 2 * m && c.cols() == 2 * n, ErrorKind::DimensionMismatch, "C is 2m x 2n");
  require(d.rows() == 2 * m && d.cols() == 2 * m, ErrorKind::DimensionMismatch, "D is 2m x 2m");
  require(a.allFinite() && b.allFinite() && c.allFinite() && d.allFinite(),
          ErrorKind::InvalidArgument, "matrix entries must be finite");
}

StateSpace build_cavity(const CavityParams& params) {
  const int m = static_cast<int>(params.kappas.size());
  require(m > 0, ErrorKind::EmptyKappas, "at least one coupling kappa required");
  double total = 0.0;
  for (double k : params.kappas) {
    require(k >= 0.0, ErrorKind::InvalidArgument, "kappa must be nonnegative");
    total += k;
  }
  require(total > 0.0, ErrorKind::InvalidArgument, "sum of kappas must be positive for Hurwitz A");

  StateSpace sys;
  sys.n = 1;
  sys.m = m;
  sys.a = -(total / 2.0) * Matrix::Identity(2, 2) + 2.0 * params.detuning * symplectic_unit();
  sys.b = Matrix(2, 2 * m);
  sys.c = Matrix(2 * m, 2);
  for (int j = 0; j < m; ++j) {
    const double root = std::sqrt(params.kappas[j]);
    sys.b.block(0, 2 * j, 2, 2) = -root * Matrix::Identity(2, 2);
    sys.c.block(2 * j, 0, 2, 2) = root * Matrix::Identity(2, 2);
  }
  sys.d = Matrix::Identity(2 * m, 2 * m);
  return sys;
}

QuadratureSubsystem quadrature_select(const StateSpace& sys, Quadrature which) {
  sys.validate();
  QuadratureSubsystem sub;
  sub.which = which;
  sub.c_meas = Matrix(sys.m, 2 * sys.n);
  sub.d_meas = Matrix(sys.m, 2 * sys.m);
  const int offset = (which == Quadrature::q) ? 0 : 1;
  for (int j = 0; j < sys.m; ++j) {
    sub.c_meas.row(j) = sys.c.row(2 * j + offset);
    sub.d_meas.row(j) = sys.d.row(2 * j + offset);
  }
  return sub;
}

std::pair<double, double> realizability_residual(const Matrix& a, const Matrix& b,
                                                 const Matrix& c_meas, const Matrix& d_meas,
                                                 const Matrix& z) {
  const int d2n = static_cast<int>(a.rows());
  require(z.rows() == d2n && z.cols() == d2n, ErrorKind::DimensionMismatch, "Z is 2n x 2n");
  require(b.rows() == d2n && b.cols() % 2 == 0, ErrorKind::DimensionMismatch, "B is 2n x 2m");
  require(c_meas.cols() == d2n && d_meas.rows() == c_meas.rows() && d_meas.cols() == b.cols(),
          ErrorKind::DimensionMismatch, "C_meas / D_meas shapes");
  const Matrix jm = symplectic(static_cast<int>(b.cols()) / 2);
  const double r1 = frob(a * z + z * a.transpose() + b * jm * b.transpose());
  const double r2 = frob(z * c_meas.transpose() + b * jm * d_meas.transpose());
  return {r1, r2};
}

TransformedTriple similarity_transform(const Matrix& a, const Matrix& b, const Matrix& c_meas,
                                       const Matrix& v) {
  require(v.rows() == v.cols() && v.rows() == a.rows(), ErrorKind::DimensionMismatch,
          "V must be 2n x 2n");
  Eigen::JacobiSVD<Matrix> svd(v, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  require(sv(sv.size() - 1) > 0 && sv(0) / sv(sv.size() - 1) < 1e12, ErrorKind::SingularV,
          "V is near singular");
  const Matrix vi = svd.solve(Matrix::Identity(v.rows(), v.cols()));
  return {v * a * vi, v * b, c_meas * vi};
}

}  // namespace qsysid

namespace qsysid {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::NotHurwitz: return "NotHurwitz";
    case ErrorKind::SingularNoise: return "SingularNoise";
    case ErrorKind::NoStabilizingSolution: return "NoStabilizingSolution";
    case ErrorKind::Blowup: return "Blowup";
    case ErrorKind::NotSkew: return "NotSkew";
    case ErrorKind::SingularZ: return "SingularZ";
    case ErrorKind::SingularV: return "SingularV";
    case ErrorKind::EmptyKappas: return "EmptyKappas";
    case ErrorKind::NonPositiveDuration: return "NonPositiveDuration";
    case ErrorKind::InsufficientData: return "InsufficientData";
    case ErrorKind::LogUndefined: return "LogUndefined";
    case ErrorKind::UnstableEstimate: return "UnstableEstimate";
    case ErrorKind::NumericalStall: return "NumericalStall";
    case ErrorKind::NoFeasiblePointFound: return "NoFeasiblePointFound";
    case ErrorKind::ZSingularOnPath: return "ZSingularOnPath";
    case ErrorKind::DegenerateN: return "DegenerateN";
    case ErrorKind::ZeroVarianceChannel: return "ZeroVarianceChannel";
    case ErrorKind::MissingArtifacts: return "MissingArtifacts";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
  }
  return "UnknownError";
}

}  // namespace qsysid
