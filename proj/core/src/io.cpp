#include "qsysid/io.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "qsysid/errors.hpp"

namespace qsysid {

using json = nlohmann::ordered_json;

namespace {

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (int r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const json& j) {
  require(j.is_array() && !j.empty(), ErrorKind::IoError, "matrix must be a nested array");
  const auto rows = j.size();
  const auto cols = j[0].size();
  Matrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    require(j[r].size() == cols, ErrorKind::IoError, "ragged matrix rows");
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

std::string format_g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string to_json(const ModelDocument& doc) {
  json j;
  j["n"] = doc.n;
  j["m"] = doc.m;
  j["A"] = matrix_to_json(doc.a);
  j["B"] = matrix_to_json(doc.b);
  j["C"] = matrix_to_json(doc.c);
  j["D"] = matrix_to_json(doc.d);
  if (doc.z) j["Z"] = matrix_to_json(*doc.z);
  if (doc.q) j["Q"] = matrix_to_json(*doc.q);
  if (doc.l) j["L"] = matrix_to_json(*doc.l);
  return j.dump(2) + "\n";
}

ModelDocument model_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    fail(ErrorKind::IoError, std::string("model JSON parse: ") + e.what());
  }
  ModelDocument doc;
  doc.n = j.at("n").get<int>();
  doc.m = j.at("m").get<int>();
  doc.a = matrix_from_json(j.at("A"));
  doc.b = matrix_from_json(j.at("B"));
  doc.c = matrix_from_json(j.at("C"));
  doc.d = matrix_from_json(j.at("D"));
  if (j.contains("Z")) doc.z = matrix_from_json(j["Z"]);
  if (j.contains("Q")) doc.q = matrix_from_json(j["Q"]);
  if (j.contains("L")) doc.l = matrix_from_json(j["L"]);
  return doc;
}

ModelDocument to_document(const StateSpace& sys) {
  sys.validate();
  return {sys.n, sys.m, sys.a, sys.b, sys.c, sys.d, std::nullopt, std::nullopt, std::nullopt};
}

ModelDocument to_document(const QuantumRealization& real) {
  ModelDocument doc;
  doc.n = real.modes();
  doc.m = real.fields();
  doc.a = real.a;
  doc.b = real.b;
  doc.c = real.c_meas;
  doc.d = real.d_meas;
  doc.z = real.z;
  if (real.q.size() > 0) doc.q = real.q;
  if (real.l_gain.size() > 0) doc.l = real.l_gain;
  return doc;
}

StateSpace state_space_from_document(const ModelDocument& doc) {
  StateSpace sys{doc.a, doc.b, doc.c, doc.d, doc.n, doc.m};
  sys.validate();
  return sys;
}

QuantumRealization realization_from_document(const ModelDocument& doc) {
  QuantumRealization real;
  real.a = doc.a;
  real.b = doc.b;
  real.c_meas = doc.c;
  real.d_meas = doc.d;
  require(doc.z.has_value(), ErrorKind::IoError, "realization document lacks Z");
  real.z = *doc.z;
  if (doc.q) real.q = *doc.q;
  if (doc.l) real.l_gain = *doc.l;
  return real;
}

std::string model_hash(const ModelDocument& doc) {
  const std::string text = to_json(doc);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, h);
  return buf;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorKind::IoError, "cannot open for writing: " + path);
  out << text;
  require(out.good(), ErrorKind::IoError, "write failed: " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::IoError, "cannot open: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string record_to_csv(const MeasurementRecord& rec) {
  std::ostringstream out;
  out << "t";
  for (int c = 0; c < rec.inputs.channels(); ++c) out << ", a" << (c + 1);
  for (int c = 0; c < rec.channels(); ++c) out << ", ydot" << (c + 1);
  out << "\n";
  for (int k = 0; k < rec.count(); ++k) {
    out << format_g17(k * rec.ts);
    for (int c = 0; c < rec.inputs.channels(); ++c)
      out << ", " << format_g17(rec.inputs.samples(k, c));
    for (int c = 0; c < rec.channels(); ++c) out << ", " << format_g17(rec.ydot(k, c));
    out << "\n";
  }
  return out.str();
}

MeasurementRecord record_from_csv(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorKind::IoError, "empty record CSV");
  int n_inputs = 0, n_outputs = 0;
  {
    std::istringstream header(line);
    std::string tok;
    while (std::getline(header, tok, ',')) {
      const auto pos = tok.find_first_not_of(' ');
      if (pos == std::string::npos) continue;
      const std::string name = tok.substr(pos);
      if (name.rfind("a", 0) == 0 && name != "a") ++n_inputs;
      if (name.rfind("ydot", 0) == 0) ++n_outputs;
    }
  }
  require(n_inputs > 0 && n_outputs > 0, ErrorKind::IoError, "record CSV header malformed");

  std::vector<double> values;
  int rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tok;
    int col = 0;
    while (std::getline(ls, tok, ',')) {
      if (col > 0) values.push_back(std::stod(tok));
      ++col;
    }
    require(col == 1 + n_inputs + n_outputs, ErrorKind::IoError, "record CSV row width");
    ++rows;
  }
  MeasurementRecord rec;
  rec.inputs.samples = Matrix(rows, n_inputs);
  rec.ydot = Matrix(rows, n_outputs);
  for (int k = 0; k < rows; ++k) {
    for (int c = 0; c < n_inputs; ++c)
      rec.inputs.samples(k, c) = values[k * (n_inputs + n_outputs) + c];
    for (int c = 0; c < n_outputs; ++c)
      rec.ydot(k, c) = values[k * (n_inputs + n_outputs) + n_inputs + c];
  }
  return rec;
}

std::string record_sidecar_json(const MeasurementRecord& rec, const std::string& hash) {
  json j;
  j["quadrature"] = to_string(rec.quadrature);
  j["Ts"] = rec.ts;
  j["Omega"] = rec.inputs.omega;
  j["seed"] = rec.seed;
  j["model_hash"] = hash;
  j["substeps"] = rec.substeps;
  return j.dump(2) + "\n";
}

void apply_record_sidecar(const std::string& json_text, MeasurementRecord* rec) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const std::exception& e) {
    fail(ErrorKind::IoError, std::string("sidecar parse: ") + e.what());
  }
  rec->quadrature = j.at("quadrature").get<std::string>() == "p" ? Quadrature::p : Quadrature::q;
  rec->ts = j.at("Ts").get<double>();
  rec->inputs.ts = rec->ts;
  rec->inputs.omega = j.at("Omega").get<double>();
  rec->seed = j.at("seed").get<std::uint64_t>();
  rec->inputs.seed = rec->seed;
  if (j.contains("substeps")) rec->substeps = j["substeps"].get<int>();
}

std::string estimate_sidecar_json(const ClassicalEstimate& est) {
  json j;
  j["order"] = est.order;
  j["Ts"] = est.ts;
  j["stable"] = est.stable;
  json sv = json::array();
  for (int k = 0; k < est.sing_values.size(); ++k) sv.push_back(est.sing_values(k));
  j["sing_values"] = std::move(sv);
  j["innov_cov"] = matrix_to_json(est.innov_cov);
  return j.dump(2) + "\n";
}

}  // namespace qsysid
