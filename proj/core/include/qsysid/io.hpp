#pragma once

#include <optional>
#include <string>

#include "qsysid/signals.hpp"
#include "qsysid/state_space.hpp"
#include "qsysid/subspace.hpp"
#include "qsysid/types.hpp"

namespace qsysid {

/// Shared model document: {n, m, A, B, C, D, Z?, Q?, L?} with matrices as
/// row-major nested arrays. C/D rows are the full interleaved outputs for a
/// StateSpace or the measured rows for a quadrature-restricted realization.
struct ModelDocument {
  int n = 0;
  int m = 0;
  Matrix a, b, c, d;
  std::optional<Matrix> z, q, l;
};

std::string to_json(const ModelDocument& doc);
ModelDocument model_from_json(const std::string& text);

ModelDocument to_document(const StateSpace& sys);
ModelDocument to_document(const QuantumRealization& real);
StateSpace state_space_from_document(const ModelDocument& doc);
QuantumRealization realization_from_document(const ModelDocument& doc);

/// FNV-1a hash of the canonical JSON serialization, as fixed-width hex.
std::string model_hash(const ModelDocument& doc);

void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

/// Record CSV: header `t, a1..a{2m}, ydot1..ydot{m}`, 17 significant digits.
std::string record_to_csv(const MeasurementRecord& rec);
MeasurementRecord record_from_csv(const std::string& csv);

/// Record sidecar {quadrature, Ts, Omega, seed, model_hash, substeps}.
std::string record_sidecar_json(const MeasurementRecord& rec, const std::string& hash);
void apply_record_sidecar(const std::string& json_text, MeasurementRecord* rec);

/// Classical estimate: model document (with L) plus an order-selection sidecar.
std::string estimate_sidecar_json(const ClassicalEstimate& est);

}  // namespace qsysid
