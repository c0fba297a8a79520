#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "garchssm/io.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Multivariate GARCH state-space model fitting and diagnostics"};
  app.require_subcommand(1);

  std::string config_path, fit_a, fit_b, fit_dir, data_path, out_file;

  auto* sim = app.add_subcommand("simulate", "Generate synthetic data from a configured model");
  sim->add_option("--config", config_path, "run configuration file")->required();

  auto* fit = app.add_subcommand("fit", "Fit the model by MCMC and write posterior artifacts");
  fit->add_option("--config", config_path, "run configuration file")->required();

  auto* cmp = app.add_subcommand("compare", "Rank two completed fits by WAIC");
  cmp->add_option("fitA", fit_a, "first fit output directory")->required();
  cmp->add_option("fitB", fit_b, "second fit output directory")->required();
  cmp->add_option("--out", out_file, "where to write the comparison record");

  auto* diag = app.add_subcommand("diagnose", "Residual and QQ diagnostics for a completed fit");
  diag->add_option("fit", fit_dir, "fit output directory")->required();
  diag->add_option("--data", data_path, "data CSV the fit was run on")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) return garchssm::cmd_simulate(garchssm::parse_config(config_path));
    if (fit->parsed()) return garchssm::cmd_fit(garchssm::parse_config(config_path));
    if (cmp->parsed()) return garchssm::cmd_compare(fit_a, fit_b, out_file);
    if (diag->parsed()) return garchssm::cmd_diagnose(fit_dir, data_path);
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 2;
  }
  return 0;
}
