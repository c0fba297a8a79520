#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "garchssm/diagnostics.hpp"
#include "garchssm/sampler.hpp"

namespace garchssm {

struct CsvData {
  SeriesData series;
  std::vector<std::string> names;      // series column names
  std::vector<std::string> time;       // carried through untouched; may be empty
  bool has_time = false;
};

/// Header row names the series; a leading "time"/"t" column is carried
/// through. Empty cells and the literal NA parse as missing.
CsvData read_csv(const std::filesystem::path& path);

void write_csv(const std::filesystem::path& path, const CsvData& data,
               const std::vector<std::string>& header_comments = {});

/// Flat key=value run configuration with dotted section keys.
struct RunConfig {
  std::string model_kind = "rwpn";     // rwpn | trend
  int dim = 1;
  bool garch_enabled = true;
  int p = 1, q = 1;
  PriorSpec priors;
  McmcConfig mcmc;
  std::filesystem::path input;
  std::filesystem::path output_dir;
  std::uint64_t seed = 0;
  Eigen::VectorXd init_m0;             // empty = zeros
  double init_c0_diag = 1e7;

  // simulate-only true values
  Eigen::Index sim_T = 0;
  std::vector<double> sim_alpha0, sim_alpha1, sim_beta1, sim_w_diag;
  double sim_rho = 0.0;
  std::vector<double> sim_R;           // row-major n*n, optional

  ModelSpec build_spec() const;
  FitSpec build_fit() const;
};

RunConfig parse_config(const std::filesystem::path& path);

int cmd_simulate(const RunConfig& config);
int cmd_fit(const RunConfig& config);
int cmd_compare(const std::filesystem::path& fit_a, const std::filesystem::path& fit_b,
                const std::filesystem::path& out_file = {});
int cmd_diagnose(const std::filesystem::path& fit_dir, const std::filesystem::path& data_csv);

}  // namespace garchssm
