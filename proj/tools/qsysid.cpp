// Command line front end: simulate homodyne records, identify physically
// realizable models, validate them, and aggregate result tables.
#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <json.hpp>
#include <optional>
#include <sstream>

#include "qsysid/errors.hpp"
#include "qsysid/io.hpp"
#include "qsysid/metrics.hpp"
#include "qsysid/pipeline.hpp"
#include "qsysid/projection.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace qsysid;

namespace {

struct CommonFlags {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::string solver;
  std::string quadrature;
};

PipelineConfig load_config(const CommonFlags& flags) {
  PipelineConfig cfg;
  if (!flags.config_path.empty()) cfg = config_from_json(read_text_file(flags.config_path));
  if (!flags.out_dir.empty()) cfg.out_dir = flags.out_dir;
  if (flags.seed) cfg.seeds = {*flags.seed};
  if (!flags.solver.empty()) cfg.solver = flags.solver;
  if (!flags.quadrature.empty())
    cfg.quadratures = {flags.quadrature == "p" ? Quadrature::p : Quadrature::q};
  return cfg;
}

std::string record_stem(const PipelineConfig& cfg, Quadrature quad, double omega,
                        std::uint64_t seed) {
  std::ostringstream ss;
  ss << cfg.out_dir << "/records/" << to_string(quad) << "_omega" << omega << "_seed" << seed;
  return ss.str();
}

std::string unit_stem(const PipelineConfig& cfg, const UnitResult& unit) {
  std::ostringstream ss;
  ss << cfg.out_dir << "/units/" << to_string(unit.quadrature) << "_omega" << unit.omega
     << "_seed" << unit.seed << "_n" << unit.order << "_" << unit.solver;
  return ss.str();
}

void write_unit_metrics(const PipelineConfig& cfg, const UnitResult& unit) {
  write_unit_files(cfg, unit, unit_stem(cfg, unit));
  json j = json::parse(read_text_file(unit_stem(cfg, unit) + "_metrics.json"));
  j["quadrature"] = to_string(unit.quadrature);
  j["omega"] = unit.omega;
  j["order"] = unit.order;
  j["seed"] = unit.seed;
  j["solver"] = unit.solver;
  write_text_file(unit_stem(cfg, unit) + "_metrics.json", j.dump(2) + "\n");
}

int cmd_simulate(const CommonFlags& flags) {
  const PipelineConfig cfg = load_config(flags);
  const StateSpace sys = pipeline_model(cfg);
  fs::create_directories(cfg.out_dir + "/records");
  int count = 0;
  for (auto quad : cfg.quadratures)
    for (double omega : cfg.omegas)
      for (auto seed : cfg.seeds) {
        const MeasurementRecord rec = simulate_unit(cfg, sys, quad, omega, seed);
        write_record_files(cfg, sys, rec, record_stem(cfg, quad, omega, seed));
        ++count;
      }
  std::printf("wrote %d records under %s/records\n", count, cfg.out_dir.c_str());
  return 0;
}

int cmd_identify(const CommonFlags& flags, const std::string& record) {
  const PipelineConfig cfg = load_config(flags);
  const StateSpace sys = pipeline_model(cfg);
  fs::create_directories(cfg.out_dir + "/units");
  std::string stem = record;
  if (stem.size() > 4 && stem.substr(stem.size() - 4) == ".csv") stem.resize(stem.size() - 4);
  const MeasurementRecord rec = load_record_files(stem);
  std::vector<std::string> solvers;
  if (cfg.solver == "both")
    solvers = {"lifted", "reduced"};
  else
    solvers = {cfg.solver};
  for (int order : cfg.orders) {
    std::map<std::string, UnitResult> by_solver;
    for (const auto& solver : solvers) {
      const UnitResult unit = identify_unit(cfg, sys, rec, order, solver);
      write_unit_metrics(cfg, unit);
      std::printf("n=%d solver=%s gamma=%.4g loss=%.4g residuals=(%.2e, %.2e)\n", order,
                  solver.c_str(), unit.gamma, unit.loss_projection, unit.residual_i,
                  unit.residual_ii);
      by_solver.emplace(solver, unit);
    }
    if (by_solver.count("lifted") && by_solver.count("reduced")) {
      const UnitResult& lifted = by_solver.at("lifted");
      const UnitResult& reduced = by_solver.at("reduced");
      json cross;
      cross["order"] = order;
      cross["gamma_lifted"] = lifted.gamma;
      cross["loss_lifted"] = lifted.loss_projection;
      cross["loss_reduced"] = reduced.loss_projection;
      cross["gamma_over_reduced_loss"] =
          lifted.gamma / std::max(reduced.loss_projection, 1e-300);
      write_text_file(unit_stem(cfg, lifted) + "_crosscheck.json", cross.dump(2) + "\n");
      std::printf("n=%d cross-check: lifted gamma / reduced loss = %.3f\n", order,
                  lifted.gamma / std::max(reduced.loss_projection, 1e-300));
    }
  }
  return 0;
}

std::string svg_polyline(const std::vector<Vector>& series, double y_lo, double y_hi,
                         double band = 0.0) {
  const int width = 900, height = 260, pad = 20;
  std::ostringstream s;
  s << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width << "' height='"
    << height * series.size() << "'>\n";
  const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};
  for (std::size_t ch = 0; ch < series.size(); ++ch) {
    const Vector& v = series[ch];
    const double y0 = static_cast<double>(ch) * height;
    auto ymap = [&](double y) {
      return y0 + pad + (height - 2 * pad) * (1.0 - (y - y_lo) / (y_hi - y_lo));
    };
    auto xmap = [&](int k) {
      return pad + (width - 2.0 * pad) * k / std::max<int>(1, static_cast<int>(v.size()) - 1);
    };
    if (band > 0.0) {
      for (double b : {band, -band})
        s << "<line x1='" << pad << "' y1='" << ymap(b) << "' x2='" << width - pad << "' y2='"
          << ymap(b) << "' stroke='#999' stroke-dasharray='4'/>\n";
    }
    s << "<polyline fill='none' stroke='" << colors[ch % 4] << "' points='";
    for (int k = 0; k < v.size(); ++k) s << xmap(k) << "," << ymap(v(k)) << " ";
    s << "'/>\n";
  }
  s << "</svg>\n";
  return s.str();
}

void write_validation_files(const PipelineConfig& cfg, const QuantumRealization& model,
                            const MeasurementRecord& rec, bool svg) {
  fs::create_directories(cfg.out_dir);
  const ResidualSet res = predict(model, rec);
  const auto fits = fit_percent(res, rec, model.d_meas);
  const CorrelationResult ac = autocorr(res, 50);

  json metrics;
  metrics["fpe"] = fpe(res);
  metrics["fit"] = fits;
  metrics["whiteness_fraction"] = whiteness_fraction(res, 50);
  write_text_file(cfg.out_dir + "/metrics.json", metrics.dump(2) + "\n");

  std::ostringstream accsv;
  accsv << "lag";
  for (std::size_t c = 0; c < ac.correlations.size(); ++c) accsv << ",rho" << (c + 1);
  accsv << ",bound\n";
  for (int tau = 0; tau < ac.correlations[0].size(); ++tau) {
    accsv << tau;
    for (const auto& rho : ac.correlations) accsv << "," << rho(tau);
    accsv << "," << ac.bound << "\n";
  }
  write_text_file(cfg.out_dir + "/autocorrelation.csv", accsv.str());

  std::ostringstream pred;
  pred << "t";
  for (int c = 0; c < res.predictions.cols(); ++c)
    pred << ",ydot" << (c + 1) << ",ydot" << (c + 1) << "_pred";
  pred << "\n";
  for (int k = 0; k < res.count; ++k) {
    pred << k * rec.ts;
    for (int c = 0; c < res.predictions.cols(); ++c)
      pred << "," << rec.ydot(k, c) << "," << res.predictions(k, c);
    pred << "\n";
  }
  write_text_file(cfg.out_dir + "/prediction.csv", pred.str());

  if (svg) {
    std::vector<Vector> acs;
    for (const auto& rho : ac.correlations) acs.push_back(rho.tail(rho.size() - 1));
    write_text_file(cfg.out_dir + "/autocorrelation.svg",
                    svg_polyline(acs, -0.2, 0.2, ac.bound));
    std::vector<Vector> overlay;
    const int show = std::min(100, res.count);
    for (int c = 0; c < res.predictions.cols(); ++c) {
      overlay.push_back(rec.ydot.col(c).head(show));
      overlay.push_back(res.predictions.col(c).head(show));
    }
    const double lo = rec.ydot.topRows(show).minCoeff();
    const double hi = rec.ydot.topRows(show).maxCoeff();
    write_text_file(cfg.out_dir + "/prediction.svg", svg_polyline(overlay, lo, hi));
  }
  std::printf("metrics: fpe=%.4g fits=[", fpe(res));
  for (std::size_t i = 0; i < fits.size(); ++i)
    std::printf("%s%.1f", i ? ", " : "", fits[i]);
  std::printf("]\n");
}

int cmd_validate(const CommonFlags& flags, const std::string& model_path,
                 const std::string& record, bool svg) {
  const PipelineConfig cfg = load_config(flags);
  std::string stem = record;
  if (stem.size() > 4 && stem.substr(stem.size() - 4) == ".csv") stem.resize(stem.size() - 4);
  const MeasurementRecord full = load_record_files(stem);
  const SplitRecord split = split_record(full, cfg.t_burn, cfg.t_est, cfg.t_val);
  const QuantumRealization model =
      realization_from_document(model_from_json(read_text_file(model_path)));
  write_validation_files(cfg, model, split.validation, svg);
  return 0;
}

int cmd_table(const CommonFlags& flags) {
  const PipelineConfig cfg = load_config(flags);
  const fs::path units = fs::path(cfg.out_dir) / "units";
  require(fs::exists(units), ErrorKind::MissingArtifacts,
          "no unit artifacts under " + units.string());
  std::vector<UnitResult> rows;
  for (const auto& entry : fs::directory_iterator(units)) {
    const std::string name = entry.path().filename().string();
    if (name.size() < 13 || name.substr(name.size() - 13) != "_metrics.json") continue;
    const json j = json::parse(read_text_file(entry.path().string()));
    if (!j.contains("omega")) continue;
    UnitResult unit;
    unit.quadrature =
        j.at("quadrature").get<std::string>() == "p" ? Quadrature::p : Quadrature::q;
    unit.omega = j.at("omega").get<double>();
    unit.order = j.at("order").get<int>();
    unit.seed = j.at("seed").get<std::uint64_t>();
    unit.solver = j.at("solver").get<std::string>();
    unit.gamma = j.at("gamma").get<double>();
    unit.fpe_value = j.at("fpe").get<double>();
    unit.fits = j.at("fit").get<std::vector<double>>();
    const auto re = j.at("relative_energy").get<std::vector<double>>();
    unit.relative_energy_score = re.at(unit.order - 1);
    rows.push_back(std::move(unit));
  }
  require(!rows.empty(), ErrorKind::MissingArtifacts, "no *_metrics.json artifacts found");
  for (auto quad : cfg.quadratures) {
    const std::string md = format_table(rows, quad);
    const std::string csv = format_table_csv(rows, quad);
    write_text_file(cfg.out_dir + "/table_" + to_string(quad) + ".md", md);
    write_text_file(cfg.out_dir + "/table_" + to_string(quad) + ".csv", csv);
    std::printf("## quadrature %s\n%s\n", to_string(quad), md.c_str());
  }
  return 0;
}

int cmd_pipeline(const CommonFlags& flags) {
  const PipelineConfig cfg = load_config(flags);
  fs::create_directories(cfg.out_dir + "/records");
  fs::create_directories(cfg.out_dir + "/units");
  const StateSpace sys = pipeline_model(cfg);
  for (auto quad : cfg.quadratures)
    for (double omega : cfg.omegas)
      for (auto seed : cfg.seeds) {
        const MeasurementRecord rec = simulate_unit(cfg, sys, quad, omega, seed);
        write_record_files(cfg, sys, rec, record_stem(cfg, quad, omega, seed));
      }
  const std::vector<UnitResult> results = run_pipeline(cfg);
  for (const auto& unit : results) write_unit_metrics(cfg, unit);
  for (auto quad : cfg.quadratures) {
    const std::string md = format_table(results, quad);
    write_text_file(cfg.out_dir + "/table_" + to_string(quad) + ".md", md);
    write_text_file(cfg.out_dir + "/table_" + to_string(quad) + ".csv",
                    format_table_csv(results, quad));
    std::printf("## quadrature %s\n%s\n", to_string(quad), md.c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Linear quantum system identification from homodyne records"};
  app.require_subcommand(1);

  CommonFlags flags;
  std::string record, model_path;
  bool svg = false;
  for (auto* sub : {app.add_subcommand("simulate", "Generate measurement records"),
                    app.add_subcommand("identify", "Identify models from a record"),
                    app.add_subcommand("validate", "Validate a model on a record"),
                    app.add_subcommand("table", "Aggregate unit metrics into tables"),
                    app.add_subcommand("pipeline", "Run the full experiment")}) {
    sub->add_option("--config", flags.config_path, "Pipeline config JSON");
    sub->add_option("--out", flags.out_dir, "Output directory");
    sub->add_option("--seed", flags.seed, "Override the seed list with one seed");
    sub->add_option("--solver", flags.solver, "lifted | reduced | both")
        ->check(CLI::IsMember({"lifted", "reduced", "both"}));
    sub->add_option("--quadrature", flags.quadrature, "q | p")
        ->check(CLI::IsMember({"q", "p"}));
  }
  app.get_subcommand("identify")->add_option("--record", record, "Record stem or CSV path")
      ->required();
  app.get_subcommand("validate")->add_option("--record", record, "Record stem or CSV path")
      ->required();
  app.get_subcommand("validate")->add_option("--model", model_path, "Model JSON path")
      ->required();
  app.get_subcommand("validate")->add_flag("--svg", svg, "Also emit SVG charts");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand("simulate")) return cmd_simulate(flags);
    if (app.got_subcommand("identify")) return cmd_identify(flags, record);
    if (app.got_subcommand("validate")) return cmd_validate(flags, model_path, record, svg);
    if (app.got_subcommand("table")) return cmd_table(flags);
    if (app.got_subcommand("pipeline")) return cmd_pipeline(flags);
  } catch (const Error& e) {
    json diag;
    diag["error"] = to_string(e.kind());
    diag["message"] = e.what();
    std::cerr << diag.dump(2) << std::endl;
    return (e.kind() == ErrorKind::ConfigError || e.kind() == ErrorKind::IoError) ? 2 : 3;
  } catch (const std::exception& e) {
    std::cerr << "{\"error\": \"Unexpected\", \"message\": \"" << e.what() << "\"}" << std::endl;
    return 3;
  }
  return 0;
}
