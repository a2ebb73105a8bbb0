// qhspec: run quasi-Hermitian spectral checks from a config file.
//
//   qhspec <subcommand> --config run.cfg [--out report.csv] [--format csv|json]
//          [--truncation N] [--margin k] [--seed S]

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "qhspec/cli_runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Quasi-Hermitian spectral checks"};
  app.require_subcommand(1);

  std::string config_path, out_path, format;
  std::optional<int> truncation, margin;
  std::optional<std::uint64_t> seed;

  app.add_option("--config", config_path, "config file (key = value or JSON)")->required();
  app.add_option("--out", out_path, "report path (default: stdout)");
  app.add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  app.add_option("--truncation", truncation, "Fock truncation N");
  app.add_option("--margin", margin, "interior margin k");
  app.add_option("--seed", seed, "seed for random check vectors");

  // Global flags are also accepted after the subcommand.
  app.fallthrough();
  for (const char* name : {"spectrum", "metric-check", "composite-check", "dual-check", "position", "sweep"}) {
    app.add_subcommand(name);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }
  const std::string sub = app.get_subcommands().front()->get_name();

  qhspec::cli::ExperimentConfig cfg;
  try {
    cfg = qhspec::cli::load_config(config_path);
    if (truncation) cfg.truncation = *truncation;
    if (margin) cfg.margin = *margin;
    if (seed) cfg.seed = *seed;
    if (!out_path.empty()) cfg.output = out_path;
    if (format == "csv") cfg.format = qhspec::cli::Format::Csv;
    if (format == "json") cfg.format = qhspec::cli::Format::Json;
    qhspec::cli::validate_config(cfg, sub);
  } catch (const qhspec::Error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  }
  return qhspec::cli::run(cfg, std::cout, std::cerr);
}
