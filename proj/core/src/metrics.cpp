#include "qsysid/metrics.hpp"

#include <cmath>
#include <unsupported/Eigen/MatrixFunctions>

#include "qsysid/errors.hpp"

namespace qsysid {

namespace {

// One-step drift map over a sample: x -> Phi x + Gamma a.
struct DriftMap {
  Matrix phi;
  Matrix gamma;
};

DriftMap drift_map_euler(const Matrix& a, const Matrix& b, double ts, int substeps) {
  const int d = static_cast<int>(a.rows());
  const double dt = ts / substeps;
  DriftMap map;
  map.phi = Matrix::Identity(d, d);
  map.gamma = Matrix::Zero(d, b.cols());
  for (int s = 0; s < substeps; ++s) {
    map.gamma += dt * map.phi * b;
    map.phi += dt * a * map.phi;
  }
  return map;
}

DriftMap drift_map_zoh(const Matrix& a, const Matrix& b, double ts) {
  DriftMap map;
  map.phi = (a * ts).exp();
  map.gamma = a.partialPivLu().solve((map.phi - Matrix::Identity(a.rows(), a.cols())) * b);
  return map;
}

}  // namespace

ResidualSet predict(const QuantumRealization& model, const MeasurementRecord& rec,
                    const PredictOptions& opts) {
  const int d = static_cast<int>(model.a.rows());
  const int m = static_cast<int>(model.c_meas.rows());
  require(rec.channels() == m, ErrorKind::DimensionMismatch, "record channels vs model outputs");
  require(rec.inputs.channels() == model.b.cols(), ErrorKind::DimensionMismatch,
          "record inputs vs model B");
  require(is_hurwitz(model.a), ErrorKind::NotHurwitz, "model A must be Hurwitz");

  const double ts = rec.ts;
  const int n_samples = rec.count();
  const Matrix ddt = model.d_meas * model.d_meas.transpose();
  const Matrix ddt_inv = ddt.inverse();
  const Matrix lcorr = model.l_gain * ddt_inv * ts;  // applied to the residual
  const DriftMap map = opts.drift == DriftScheme::zoh
                           ? drift_map_zoh(model.a, model.b, ts)
                           : drift_map_euler(model.a, model.b, ts, std::max(1, rec.substeps));

  // The drift map on x is linear, so residuals are affine in x0: run from the
  // origin, then correct with the closed-loop sensitivity if requested.
  auto run = [&](const Vector& x0, ResidualSet* out) {
    Vector x = x0;
    for (int k = 0; k < n_samples; ++k) {
      const auto alpha = rec.inputs.samples.row(k).transpose();
      const Vector pred = model.c_meas * x + model.d_meas * alpha;
      const Vector e = rec.ydot.row(k).transpose() - pred;
      out->predictions.row(k) = pred.transpose();
      out->e.row(k) = e.transpose();
      x = map.phi * x + map.gamma * alpha + lcorr * e;
    }
  };

  ResidualSet res;
  res.count = n_samples;
  const int n2 = d;
  const int m2 = static_cast<int>(model.b.cols());
  res.param_count = n2 * n2 + n2 * m2 + m * n2 + n2 * m;
  res.e = Matrix(n_samples, m);
  res.predictions = Matrix(n_samples, m);
  run(Vector::Zero(d), &res);

  if (opts.x0 == InitialState::estimate) {
    // e(x0) = e(0) - C M_k x0 with M the homogeneous closed-loop propagator.
    const Matrix acl = map.phi - lcorr * model.c_meas;
    Matrix mk = Matrix::Identity(d, d);
    Matrix gram = Matrix::Zero(d, d);
    Vector rhs = Vector::Zero(d);
    for (int k = 0; k < n_samples; ++k) {
      const Matrix cm = model.c_meas * mk;
      gram += cm.transpose() * cm;
      rhs += cm.transpose() * res.e.row(k).transpose();
      mk = acl * mk;
    }
    const Vector x0 = gram.ldlt().solve(rhs);
    run(x0, &res);
  }
  return res;
}

double fpe(const ResidualSet& res) {
  const int n = res.count;
  const int d = res.param_count;
  require(n > d, ErrorKind::DegenerateN, "need more samples than parameters");
  const Matrix cov = res.e.transpose() * res.e / static_cast<double>(n);
  return cov.determinant() * (1.0 + static_cast<double>(d) / n) /
         (1.0 - static_cast<double>(d) / n);
}

std::vector<double> fit_percent(const ResidualSet& res, const MeasurementRecord& rec,
                                const Matrix& d_meas) {
  const Matrix z = rec.ydot - rec.inputs.samples * d_meas.transpose();
  std::vector<double> fits;
  for (int c = 0; c < z.cols(); ++c) {
    const double mu = z.col(c).mean();
    const double den = (z.col(c).array() - mu).matrix().norm();
    require(den > 0.0, ErrorKind::ZeroVarianceChannel, "output channel has zero variance");
    fits.push_back(100.0 * (1.0 - res.e.col(c).norm() / den));
  }
  return fits;
}

CorrelationResult autocorr(const ResidualSet& res, int max_lag) {
  const int n = res.count;
  require(n > max_lag, ErrorKind::InsufficientData, "need more samples than lags");
  CorrelationResult out;
  out.bound = 2.5758 / std::sqrt(static_cast<double>(n));
  for (int c = 0; c < res.e.cols(); ++c) {
    const auto x = res.e.col(c);
    const double den = x.squaredNorm();
    Vector rho(max_lag + 1);
    for (int tau = 0; tau <= max_lag; ++tau)
      rho(tau) = x.head(n - tau).dot(x.tail(n - tau)) / den;
    out.correlations.push_back(rho);
  }
  return out;
}

CorrelationResult cross_corr(const ResidualSet& res, const InputSignal& input, int max_lag) {
  const int n = res.count;
  require(n > max_lag, ErrorKind::InsufficientData, "need more samples than lags");
  require(input.count() == n, ErrorKind::DimensionMismatch, "input length vs residuals");
  CorrelationResult out;
  out.bound = 2.5758 / std::sqrt(static_cast<double>(n));
  for (int ce = 0; ce < res.e.cols(); ++ce) {
    const auto e = res.e.col(ce);
    const double en = e.norm();
    for (int cu = 0; cu < input.channels(); ++cu) {
      const auto u = input.samples.col(cu);
      const double norm = en * u.norm() + 1e-300;
      Vector rho(2 * max_lag + 1);
      for (int tau = -max_lag; tau <= max_lag; ++tau) {
        // correlation of e(k + tau) with u(k)
        double acc = 0.0;
        if (tau >= 0)
          acc = e.tail(n - tau).dot(u.head(n - tau));
        else
          acc = e.head(n + tau).dot(u.tail(n + tau));
        rho(tau + max_lag) = acc / norm;
      }
      out.correlations.push_back(rho);
    }
  }
  return out;
}

std::vector<double> whiteness_fraction(const ResidualSet& res, int max_lag) {
  const CorrelationResult ac = autocorr(res, max_lag);
  std::vector<double> fractions;
  for (const Vector& rho : ac.correlations) {
    int inside = 0;
    for (int tau = 1; tau <= max_lag; ++tau)
      if (std::abs(rho(tau)) <= ac.bound) ++inside;
    fractions.push_back(static_cast<double>(inside) / max_lag);
  }
  return fractions;
}

}  // namespace qsysid
