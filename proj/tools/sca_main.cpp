#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "sca/parser.hpp"
#include "sca/report.hpp"
#include "sca/simulator.hpp"
#include "sca/xmile.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 1;
constexpr int kExitInternal = 2;

sca::Model load_model(const std::string& path,
                      std::optional<sca::InputFormat> format) {
  sca::RunConfig probe;
  probe.input_path = path;
  probe.format = format;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw sca::InputError("cannot read '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  bool xmile = format ? *format == sca::InputFormat::Xmile
                      : (path.ends_with(".xmile") || path.ends_with(".xml"));
  auto parsed = xmile ? sca::import_xmile(text) : sca::parse_model(text);
  if (!parsed.ok()) {
    std::string msg = "cannot parse '" + path + "':";
    for (const auto& e : parsed.errors) msg += "\n  " + e.to_string();
    throw sca::InputError(msg);
  }
  for (const auto& w : parsed.warnings) {
    std::cerr << "warning: " << w.variable << ": " << w.message << "\n";
  }
  return *parsed.model;
}

int run_analyze(const sca::RunConfig& cfg) {
  auto out = sca::run_sca(cfg);
  for (const auto& w : out.warnings) std::cerr << "warning: " << w << "\n";
  if (cfg.dot_path && out.dot) {
    std::ofstream dot(*cfg.dot_path, std::ios::binary);
    if (!dot) {
      throw sca::InputError("cannot write DOT to '" + *cfg.dot_path + "'");
    }
    dot << *out.dot;
  }
  std::cout << (cfg.report_format == sca::ReportFormat::Json
                    ? sca::render_json(out.report)
                    : sca::render_text(out.report));
  return kExitOk;
}

int run_simulate(const std::string& path,
                 std::optional<sca::InputFormat> format, double dt,
                 double horizon, const std::string& csv_path) {
  auto model = load_model(path, format);
  sca::SimConfig cfg;
  cfg.dt = dt;
  cfg.horizon = horizon;
  auto trajectory = sca::simulate(model, cfg);
  std::string csv = sca::trajectory_to_csv(trajectory);
  if (csv_path.empty()) {
    std::cout << csv;
  } else {
    std::ofstream out(csv_path, std::ios::binary);
    if (!out) throw sca::InputError("cannot write CSV to '" + csv_path + "'");
    out << csv;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Structural control analysis for stock-and-flow models"};
  app.require_subcommand(1);

  std::map<std::string, sca::InputFormat> format_map{
      {"sdm", sca::InputFormat::Sdm}, {"xmile", sca::InputFormat::Xmile}};
  std::map<std::string, sca::DashedChoice> dashed_map{
      {"both", sca::DashedChoice::Both},
      {"solid", sca::DashedChoice::Solid},
      {"absent", sca::DashedChoice::Absent}};
  std::map<std::string, sca::ReportFormat> report_map{
      {"text", sca::ReportFormat::Text}, {"json", sca::ReportFormat::Json}};

  // analyze
  sca::RunConfig cfg;
  std::optional<sca::InputFormat> format;
  std::string dot_path;
  auto* analyze = app.add_subcommand("analyze", "Run the five-step analysis");
  analyze->add_option("path", cfg.input_path, "model file")->required();
  analyze->add_option("--format", format, "input format")
      ->transform(CLI::CheckedTransformer(format_map, CLI::ignore_case));
  analyze->add_option("--dashed", cfg.dashed, "non-spanning edge handling")
      ->transform(CLI::CheckedTransformer(dashed_map, CLI::ignore_case));
  analyze->add_option("--dt", cfg.dt, "time step echoed into the run config");
  analyze->add_option("--samples", cfg.samples, "classification sample count");
  analyze->add_option("--seed", cfg.seed, "classification sampling seed");
  analyze->add_option("--dot", dot_path, "write the control graph as DOT");
  analyze->add_option("--report", cfg.report_format, "report format")
      ->transform(CLI::CheckedTransformer(report_map, CLI::ignore_case));
  analyze->add_flag("--no-delay-expansion", cfg.no_delay_expansion,
                    "debug: skip hidden-stock expansion (unsound analysis)");

  // simulate
  std::string sim_path, csv_path;
  std::optional<sca::InputFormat> sim_format;
  double sim_dt = 0.25, sim_horizon = 10.0;
  auto* simulate = app.add_subcommand("simulate", "Fixed-step Euler run");
  simulate->add_option("path", sim_path, "model file")->required();
  simulate->add_option("--format", sim_format, "input format")
      ->transform(CLI::CheckedTransformer(format_map, CLI::ignore_case));
  simulate->add_option("--dt", sim_dt, "time step");
  simulate->add_option("--horizon", sim_horizon, "simulated time span");
  simulate->add_option("--csv", csv_path, "write trajectory CSV here");

  CLI11_PARSE(app, argc, argv);

  try {
    if (analyze->parsed()) {
      cfg.format = format;
      if (!dot_path.empty()) cfg.dot_path = dot_path;
      return run_analyze(cfg);
    }
    return run_simulate(sim_path, sim_format, sim_dt, sim_horizon, csv_path);
  } catch (const sca::InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "internal analysis failure: " << e.what() << "\n";
    return kExitInternal;
  }
}
