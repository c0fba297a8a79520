#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "garchssm/stats.hpp"

namespace garchssm {

using BoolMask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Linear-Gaussian state-space skeleton: y_t = F' theta_t + z_t,
/// theta_t = G theta_{t-1} + w_t, theta_0 ~ N(m0, C0).
struct ModelSpec {
  Eigen::MatrixXd Fprime;  // n x r observation map
  Eigen::MatrixXd G;       // r x r state evolution
  Eigen::VectorXd m0;      // prior state mean
  Eigen::MatrixXd C0;      // prior state covariance, SPD

  Eigen::Index n() const { return Fprime.rows(); }
  Eigen::Index r() const { return Fprime.cols(); }
  void validate() const;
};

/// Per-series GARCH(p,q) coefficients for the observation errors.
struct GarchParams {
  std::vector<double> alpha0;               // baseline variance, > 0
  std::vector<std::vector<double>> alpha;   // ARCH loadings, per series, size p
  std::vector<std::vector<double>> beta;    // GARCH loadings, per series, size q

  Eigen::Index n_series() const { return static_cast<Eigen::Index>(alpha0.size()); }
  int p() const { return alpha.empty() ? 0 : static_cast<int>(alpha[0].size()); }
  int q() const { return beta.empty() ? 0 : static_cast<int>(beta[0].size()); }

  double loading_sum(Eigen::Index i) const;
  /// Pre-sample variance: alpha0/(1 - sum) while the sum stays below 0.999,
  /// alpha0 otherwise.
  double unconditional_variance(Eigen::Index i) const;
  bool is_valid() const;
  void validate() const;

  static GarchParams zeros(Eigen::Index n, int p = 1, int q = 1);
};

/// Upper-triangular factor U with unit-norm rows; R = U U^T is a correlation
/// matrix with unit diagonal and u_nn = 1.
struct CorrelationFactor {
  Eigen::MatrixXd U;

  Eigen::MatrixXd correlation() const { return U * U.transpose(); }
};

struct StateCov {
  Eigen::MatrixXd W;  // r x r SPD, constant over time
  void validate() const;
};

struct SeriesData {
  Eigen::MatrixXd y;  // T x n
  BoolMask observed;  // T x n, true = value present

  Eigen::Index T() const { return y.rows(); }
  Eigen::Index n() const { return y.cols(); }
  void validate() const;
};

struct SimulationTruth {
  Eigen::MatrixXd states;  // (T+1) x r, rows are theta_0..theta_T
  Eigen::MatrixXd sigma;   // T x n true conditional standard deviations
  Eigen::MatrixXd z;       // T x n observation errors
};

ModelSpec build_random_walk_plus_noise(Eigen::Index n);
ModelSpec build_local_linear_trend(Eigen::Index n);

/// One step of the variance recursion:
/// sigma2 = alpha0 + sum_j alpha_j z2_{t-j} + sum_j beta_j sigma2_{t-j}.
double garch_variance_step(const GarchParams& params, Eigen::Index series,
                           const std::vector<double>& lagged_z2,
                           const std::vector<double>& lagged_sigma2);

/// V = D R D with D = diag(sigma).
Eigen::MatrixXd build_observation_cov(const Eigen::VectorXd& sigma, const Eigen::MatrixXd& R);

/// Normalizes the rows of an upper-triangular matrix with positive diagonal
/// to unit Euclidean norm and forms R = U U^T.
std::pair<CorrelationFactor, Eigen::MatrixXd> correlation_from_factor(const Eigen::MatrixXd& U_raw);

/// 2x2 correlation matrix from a single coefficient rho in (-1, 1).
Eigen::MatrixXd correlation_from_rho(double rho);

SeriesData apply_missingness(const SeriesData& data, const BoolMask& mask);

std::pair<SeriesData, SimulationTruth> simulate(const ModelSpec& spec, const GarchParams& garch,
                                                const Eigen::MatrixXd& R, const StateCov& W,
                                                Eigen::Index T, std::uint64_t seed);

}  // namespace garchssm
