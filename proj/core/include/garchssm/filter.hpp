#pragma once

#include <vector>

#include "garchssm/model.hpp"

namespace garchssm {

/// One time step of filter output. P_t is the predicted state covariance
/// (prior to the update), Q_t the one-step forecast covariance over all
/// components; logpred covers the observed components only.
struct FilterStep {
  Eigen::VectorXd a;   // predicted state mean
  Eigen::MatrixXd P;   // predicted state covariance
  Eigen::VectorXd S2;  // filtered GARCH variances per series
  Eigen::VectorXd f;   // one-step forecast mean
  Eigen::MatrixXd Q;   // one-step forecast covariance
  Eigen::VectorXd e;   // forecast error (zero at missing components)
  Eigen::MatrixXd K;   // Kalman gain, r x n, zero columns at missing components
  Eigen::VectorXd m;   // filtered state mean
  Eigen::MatrixXd C;   // filtered state covariance
  double logpred = 0.0;
};

struct FilterOutput {
  std::vector<FilterStep> steps;  // t = 1..T
  double loglik = 0.0;
  Eigen::VectorXd pointwise;      // logpred per time step
};

FilterOutput kalman_filter(const SeriesData& data, const ModelSpec& spec,
                           const GarchParams& garch, const Eigen::MatrixXd& R,
                           const StateCov& W);

std::vector<std::pair<Eigen::VectorXd, Eigen::MatrixXd>> one_step_forecasts(
    const FilterOutput& output);

Eigen::VectorXd pointwise_log_predictive(const FilterOutput& output);

}  // namespace garchssm
