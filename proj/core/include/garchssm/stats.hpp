#pragma once

#include <Eigen/Dense>
#include <random>
#include <vector>

namespace garchssm {

using Rng = std::mt19937_64;

double normal_cdf(double x);
double normal_quantile(double p);
double log_normal_pdf(double x, double mean, double sd);

/// log density of a half-Cauchy(scale) variable at x >= 0; -inf for x < 0.
double log_half_cauchy(double x, double scale);

double log_sum_exp(const Eigen::VectorXd& v);

/// Empirical quantile by linear interpolation of order statistics.
double quantile(std::vector<double> values, double p);

/// Draw from N(mean, cov); cov factored internally via LLT.
Eigen::VectorXd mvn_draw(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov, Rng& rng);

/// Draw from Wishart(df, scale) via the Bartlett decomposition.
Eigen::MatrixXd wishart_draw(double df, const Eigen::MatrixXd& scale, Rng& rng);

/// Draw from Inverse-Wishart(df, scale).
Eigen::MatrixXd inverse_wishart_draw(double df, const Eigen::MatrixXd& scale, Rng& rng);

struct KsResult {
  double statistic;
  double p_value;
};

/// One-sample Kolmogorov-Smirnov test against N(0,1).
KsResult ks_test_normal(const std::vector<double>& sample);

/// FNV-1a hash of a byte string, hex-encoded. Used for file fingerprints.
std::string fnv1a_hex(const std::string& bytes);

}  // namespace garchssm
