#pragma once

#include <string>
#include <vector>

#include "garchssm/sampler.hpp"

namespace garchssm {

struct WaicReport {
  double lppd = 0.0;
  double p_waic = 0.0;
  double waic = 0.0;
  Eigen::VectorXd per_point;  // per-time waic contributions
};

/// pointwise_lp is draws x T; higher waic = better fit.
WaicReport waic(const Eigen::MatrixXd& pointwise_lp);

struct ModelRank {
  std::string name;
  double waic;
  double diff_to_best;
};

std::vector<ModelRank> compare_models(
    const std::vector<std::pair<std::string, WaicReport>>& reports);

Eigen::VectorXd ergodic_means(const Eigen::VectorXd& draws);

struct SummaryRow {
  std::string name;
  double mean, median, sd, ci_lo, ci_hi;
};

std::vector<SummaryRow> summarize(const std::vector<std::string>& names,
                                  const Eigen::MatrixXd& flat_draws);

struct ResidualReport {
  Eigen::MatrixXd raw;            // y - F'theta_hat, NaN at missing cells
  Eigen::MatrixXd standardized;   // raw scaled by the fitted sigma path
  // per series: (theoretical quantile, empirical quantile) pairs, ascending
  std::vector<std::vector<std::pair<double, double>>> qq;
  std::vector<KsResult> ks;       // standardized residuals vs N(0,1), per series
};

ResidualReport residual_analysis(const SeriesData& data, const ModelSpec& spec,
                                 const GarchParams& garch, const Eigen::MatrixXd& R,
                                 const StateCov& W, const Eigen::MatrixXd& state_estimate);

struct VariancePath {
  // each T x 3: columns mean, lo95, hi95 of sigma_{i,t}
  std::vector<Eigen::MatrixXd> per_series;
};

VariancePath dynamic_variance_path(const PosteriorDraws& draws, const SeriesData& data,
                                   const FitSpec& fit);

}  // namespace garchssm
