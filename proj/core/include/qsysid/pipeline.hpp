#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qsysid/metrics.hpp"
#include "qsysid/projection.hpp"
#include "qsysid/signals.hpp"
#include "qsysid/state_space.hpp"
#include "qsysid/subspace.hpp"

namespace qsysid {

/// Full experiment description; the default constructed value is the shipped
/// cavity experiment (Ts = 0.01, 20/30/30 split, Omega in {10,50,100}/sqrt(Ts),
/// orders 1..3).
struct PipelineConfig {
  CavityParams cavity{10.0, {5.0, 3.0, 2.0}};
  std::optional<std::string> model_path;  // overrides the cavity builder
  std::vector<Quadrature> quadratures{Quadrature::q, Quadrature::p};
  double ts = 0.01;
  double t_burn = 20.0, t_est = 30.0, t_val = 30.0;
  std::vector<double> omegas{100.0, 500.0, 1000.0};
  std::vector<int> orders{1, 2, 3};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::string solver = "lifted";  // lifted | reduced | both
  double gamma0 = -1.0;           // <= 0: 2x reduced loss
  double epsilon = 1e-3;
  int substeps = 32;
  int block_rows = 20;
  int rounds = 20;
  int max_iter = 250;
  double conditioning = 0.0;  // 0: auto-balance; > 0: fixed scale factor
  std::string out_dir = "out";
  int threads = 0;  // 0: hardware concurrency
};

PipelineConfig config_from_json(const std::string& text);
std::string config_to_json(const PipelineConfig& cfg);

/// One (quadrature, omega, order, seed, solver) work item's outcome.
struct UnitResult {
  Quadrature quadrature = Quadrature::q;
  double omega = 0.0;
  int order = 1;
  std::uint64_t seed = 0;
  std::string solver;
  double relative_energy_score = 0.0;
  double gamma = 0.0;
  double loss_projection = 0.0;
  double loss_reduced = 0.0;
  double fpe_value = 0.0;
  std::vector<double> fits;
  std::vector<double> whiteness;
  double gain_max_abs = 0.0;
  double residual_i = 0.0;
  double residual_ii = 0.0;
  double det_z = 0.0;
  bool stable = true;
  QuantumRealization canonical;
  ClassicalEstimate estimate;
};

StateSpace pipeline_model(const PipelineConfig& cfg);

/// Conditioning scale t for T = t I applied before projection: balances
/// ||B t|| against ||C / t||.
double balance_factor(const ClassicalEstimate& est);

/// The estimate after the conditioning similarity transform T = t I.
ClassicalEstimate apply_conditioning(const ClassicalEstimate& est, double t);

/// Simulates one record for (quadrature, omega, seed) under the config.
MeasurementRecord simulate_unit(const PipelineConfig& cfg, const StateSpace& sys,
                                Quadrature which, double omega, std::uint64_t seed);

/// Identification + projection + validation for one work item. The record is
/// the full 80 s record; the split comes from the config.
UnitResult identify_unit(const PipelineConfig& cfg, const StateSpace& sys,
                         const MeasurementRecord& rec, int order, const std::string& solver);

/// Runs every (quadrature, omega, order, seed) combination, fanning out over
/// threads; results are ordered deterministically.
std::vector<UnitResult> run_pipeline(const PipelineConfig& cfg, bool write_artifacts = false);

/// Markdown table mirroring the paper's layout: one row per (omega, n) with
/// medians over seeds (interquartile ranges appended for multi-seed runs).
std::string format_table(const std::vector<UnitResult>& results, Quadrature which);
std::string format_table_csv(const std::vector<UnitResult>& results, Quadrature which);

/// Artifact writers used by the command line tool.
void write_record_files(const PipelineConfig& cfg, const StateSpace& sys,
                        const MeasurementRecord& rec, const std::string& stem);
MeasurementRecord load_record_files(const std::string& stem);
void write_unit_files(const PipelineConfig& cfg, const UnitResult& unit, const std::string& stem);

}  // namespace qsysid
