#include "garchssm/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace garchssm {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Acklam's rational approximation, refined with one Halley step.
double normal_quantile(double p) {
  if (p <= 0.0 || p >= 1.0) throw std::invalid_argument("normal_quantile: p outside (0,1)");
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double x;
  if (p < plow) {
    double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - plow) {
    double q = p - 0.5, r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  double e = normal_cdf(x) - p;
  double u = e * std::sqrt(2.0 * M_PI) * std::exp(x * x / 2.0);
  return x - u / (1.0 + x * u / 2.0);
}

double log_normal_pdf(double x, double mean, double sd) {
  double z = (x - mean) / sd;
  return -0.5 * z * z - std::log(sd) - 0.5 * std::log(2.0 * M_PI);
}

double log_half_cauchy(double x, double scale) {
  if (x < 0.0) return -std::numeric_limits<double>::infinity();
  double r = x / scale;
  return std::log(2.0 / (M_PI * scale)) - std::log1p(r * r);
}

double log_sum_exp(const Eigen::VectorXd& v) {
  double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

double quantile(std::vector<double> values, double p) {
  if (values.empty()) throw std::invalid_argument("quantile: empty input");
  std::sort(values.begin(), values.end());
  if (values.size() == 1) return values[0];
  double h = p * static_cast<double>(values.size() - 1);
  auto lo = static_cast<std::size_t>(std::floor(h));
  auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

Eigen::VectorXd mvn_draw(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov, Rng& rng) {
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  Eigen::MatrixXd L;
  if (llt.info() == Eigen::Success) {
    L = llt.matrixL();
  } else {
    Eigen::MatrixXd jittered = cov + 1e-10 * Eigen::MatrixXd::Identity(cov.rows(), cov.cols());
    Eigen::LLT<Eigen::MatrixXd> llt2(jittered);
    if (llt2.info() == Eigen::Success) {
      L = llt2.matrixL();
    } else {
      // near-PSD after heavy cancellation: clamp the negative eigenvalues
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
      if (es.info() != Eigen::Success || es.eigenvalues().maxCoeff() < 0.0)
        throw std::runtime_error("mvn_draw: covariance not positive definite");
      Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
      L = es.eigenvectors() * ev.asDiagonal();
    }
  }
  std::normal_distribution<double> std_normal(0.0, 1.0);
  Eigen::VectorXd z(mean.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = std_normal(rng);
  return mean + L * z;
}

Eigen::MatrixXd wishart_draw(double df, const Eigen::MatrixXd& scale, Rng& rng) {
  const Eigen::Index r = scale.rows();
  Eigen::LLT<Eigen::MatrixXd> llt(scale);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("wishart_draw: scale not positive definite");
  Eigen::MatrixXd L = llt.matrixL();
  std::normal_distribution<double> std_normal(0.0, 1.0);
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(r, r);
  for (Eigen::Index i = 0; i < r; ++i) {
    std::chi_squared_distribution<double> chi2(df - static_cast<double>(i));
    A(i, i) = std::sqrt(chi2(rng));
    for (Eigen::Index j = 0; j < i; ++j) A(i, j) = std_normal(rng);
  }
  Eigen::MatrixXd LA = L * A;
  return LA * LA.transpose();
}

Eigen::MatrixXd inverse_wishart_draw(double df, const Eigen::MatrixXd& scale, Rng& rng) {
  Eigen::MatrixXd W = wishart_draw(df, scale.inverse(), rng);
  Eigen::MatrixXd X = W.inverse();
  return 0.5 * (X + X.transpose());
}

namespace {
// Asymptotic Kolmogorov distribution tail, Q(x) = 2 sum (-1)^{k-1} exp(-2 k^2 x^2).
double kolmogorov_pvalue(double x) {
  if (x < 1e-8) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    double term = 2.0 * std::pow(-1.0, k - 1) * std::exp(-2.0 * k * k * x * x);
    sum += term;
    if (std::abs(term) < 1e-12) break;
  }
  return std::clamp(sum, 0.0, 1.0);
}
}  // namespace

KsResult ks_test_normal(const std::vector<double>& sample) {
  if (sample.empty()) throw std::invalid_argument("ks_test_normal: empty sample");
  std::vector<double> x = sample;
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double cdf = normal_cdf(x[i]);
    double d_plus = (static_cast<double>(i) + 1.0) / n - cdf;
    double d_minus = cdf - static_cast<double>(i) / n;
    d = std::max({d, d_plus, d_minus});
  }
  return {d, kolmogorov_pvalue((std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n)) * d)};
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

}  // namespace garchssm
