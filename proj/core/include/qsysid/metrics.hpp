#pragma once

#include <vector>

#include "qsysid/signals.hpp"
#include "qsysid/state_space.hpp"
#include "qsysid/types.hpp"

namespace qsysid {

/// One-step prediction residuals of a model on a record.
struct ResidualSet {
  Matrix e;            // N x m residuals
  Matrix predictions;  // N x m
  int count = 0;
  int param_count = 0;  // d = (2n)^2 + 2n*2m + m*2n + 2n*m
};

enum class InitialState {
  zero,      // start the predictor at the origin (exact on full records)
  estimate,  // least-squares initial state from the record itself
};

enum class DriftScheme {
  match_record,  // sub-stepped Euler with the record's substep factor
  zoh,           // exact zero-order-hold map (for external or stiff models)
};

struct PredictOptions {
  InitialState x0 = InitialState::estimate;
  DriftScheme drift = DriftScheme::match_record;
};

/// Runs the one-step-ahead Kalman predictor in the same discretization as the
/// simulator (drift sub-steps from the record): prediction C x + D a, state
/// update through L (D D')^-1 e Ts.
ResidualSet predict(const QuantumRealization& model, const MeasurementRecord& rec,
                    const PredictOptions& opts = {});

/// Akaike final prediction error det((1/N) sum e e') (1 + d/N)/(1 - d/N).
double fpe(const ResidualSet& res);

/// Percentage fit per output channel, 100 (1 - ||e_l|| / ||z_l - mean||),
/// measured against the feedthrough-removed output z = ydot - D_meas alpha.
std::vector<double> fit_percent(const ResidualSet& res, const MeasurementRecord& rec,
                                const Matrix& d_meas);

struct CorrelationResult {
  std::vector<Vector> correlations;  // per channel (or channel pair)
  double bound = 0.0;                // +-2.5758 / sqrt(N)
};

/// Biased sample autocorrelation per residual channel, lags 1..max_lag.
CorrelationResult autocorr(const ResidualSet& res, int max_lag);

/// Normalized cross-correlation between every residual channel and every
/// input channel over lags -max_lag..max_lag (index 0 = lag -max_lag).
CorrelationResult cross_corr(const ResidualSet& res, const InputSignal& input, int max_lag);

/// Fraction of lags 1..max_lag inside the 99% band, per channel.
std::vector<double> whiteness_fraction(const ResidualSet& res, int max_lag);

}  // namespace qsysid
