#include "garchssm/model.hpp"

#include <cmath>
#include <stdexcept>

namespace garchssm {

namespace {
void require(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

bool is_spd(const Eigen::MatrixXd& M) {
  if (M.rows() != M.cols()) return false;
  if (!M.isApprox(M.transpose(), 1e-8)) return false;
  Eigen::LLT<Eigen::MatrixXd> llt(M);
  return llt.info() == Eigen::Success;
}
}  // namespace

void ModelSpec::validate() const {
  require(Fprime.rows() >= 1 && Fprime.cols() >= 1, "ModelSpec: empty observation map");
  require(G.rows() == r() && G.cols() == r(), "ModelSpec: G shape must be r x r");
  require(m0.size() == r(), "ModelSpec: m0 length must be r");
  require(is_spd(C0), "ModelSpec: C0 must be symmetric positive definite");
}

double GarchParams::loading_sum(Eigen::Index i) const {
  double s = 0.0;
  for (double a : alpha[i]) s += a;
  for (double b : beta[i]) s += b;
  return s;
}

double GarchParams::unconditional_variance(Eigen::Index i) const {
  double s = loading_sum(i);
  if (s > 0.999) return alpha0[i];
  return alpha0[i] / (1.0 - s);
}

bool GarchParams::is_valid() const {
  if (alpha0.empty()) return false;
  if (alpha.size() != alpha0.size() || beta.size() != alpha0.size()) return false;
  for (Eigen::Index i = 0; i < n_series(); ++i) {
    if (!(alpha0[i] > 0.0) || !std::isfinite(alpha0[i])) return false;
    for (double a : alpha[i])
      if (a < 0.0 || !std::isfinite(a)) return false;
    for (double b : beta[i])
      if (b < 0.0 || !std::isfinite(b)) return false;
    if (loading_sum(i) >= 1.0) return false;
  }
  return true;
}

void GarchParams::validate() const {
  require(is_valid(), "GarchParams: positivity or stationarity constraint violated");
}

GarchParams GarchParams::zeros(Eigen::Index n, int p, int q) {
  GarchParams g;
  g.alpha0.assign(n, 1.0);
  g.alpha.assign(n, std::vector<double>(p, 0.0));
  g.beta.assign(n, std::vector<double>(q, 0.0));
  return g;
}

void StateCov::validate() const { require(is_spd(W), "StateCov: W must be SPD"); }

void SeriesData::validate() const {
  require(y.rows() == observed.rows() && y.cols() == observed.cols(),
          "SeriesData: mask shape mismatch");
  require(observed.any(), "SeriesData: no observed cells");
}

ModelSpec build_random_walk_plus_noise(Eigen::Index n) {
  require(n >= 1, "build_random_walk_plus_noise: n must be >= 1");
  ModelSpec spec;
  spec.Fprime = Eigen::MatrixXd::Identity(n, n);
  spec.G = Eigen::MatrixXd::Identity(n, n);
  spec.m0 = Eigen::VectorXd::Zero(n);
  spec.C0 = 1e7 * Eigen::MatrixXd::Identity(n, n);
  return spec;
}

ModelSpec build_local_linear_trend(Eigen::Index n) {
  require(n >= 1, "build_local_linear_trend: n must be >= 1");
  const Eigen::Index r = 2 * n;
  ModelSpec spec;
  spec.Fprime = Eigen::MatrixXd::Zero(n, r);
  spec.G = Eigen::MatrixXd::Zero(r, r);
  for (Eigen::Index j = 0; j < n; ++j) {
    spec.Fprime(j, 2 * j) = 1.0;
    // per-series block [[1,1],[0,1]]: level picks up the slope
    spec.G(2 * j, 2 * j) = 1.0;
    spec.G(2 * j, 2 * j + 1) = 1.0;
    spec.G(2 * j + 1, 2 * j + 1) = 1.0;
  }
  spec.m0 = Eigen::VectorXd::Zero(r);
  spec.C0 = 1e7 * Eigen::MatrixXd::Identity(r, r);
  return spec;
}

double garch_variance_step(const GarchParams& params, Eigen::Index series,
                           const std::vector<double>& lagged_z2,
                           const std::vector<double>& lagged_sigma2) {
  params.validate();
  require(series >= 0 && series < params.n_series(), "garch_variance_step: bad series index");
  require(static_cast<int>(lagged_z2.size()) == params.p(),
          "garch_variance_step: lagged_z2 length must equal p");
  require(static_cast<int>(lagged_sigma2.size()) == params.q(),
          "garch_variance_step: lagged_sigma2 length must equal q");
  double s2 = params.alpha0[series];
  for (std::size_t j = 0; j < lagged_z2.size(); ++j) {
    require(lagged_z2[j] >= 0.0, "garch_variance_step: negative squared-error lag");
    s2 += params.alpha[series][j] * lagged_z2[j];
  }
  for (std::size_t j = 0; j < lagged_sigma2.size(); ++j) {
    require(lagged_sigma2[j] >= 0.0, "garch_variance_step: negative variance lag");
    s2 += params.beta[series][j] * lagged_sigma2[j];
  }
  return s2;
}

Eigen::MatrixXd build_observation_cov(const Eigen::VectorXd& sigma, const Eigen::MatrixXd& R) {
  require(sigma.size() == R.rows() && R.rows() == R.cols(),
          "build_observation_cov: dimension mismatch");
  require((sigma.array() > 0.0).all(), "build_observation_cov: nonpositive sigma");
  return sigma.asDiagonal() * R * sigma.asDiagonal();
}

std::pair<CorrelationFactor, Eigen::MatrixXd> correlation_from_factor(
    const Eigen::MatrixXd& U_raw) {
  const Eigen::Index n = U_raw.rows();
  require(n >= 1 && U_raw.cols() == n, "correlation_from_factor: U must be square");
  CorrelationFactor factor;
  factor.U = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < i; ++j)
      require(U_raw(i, j) == 0.0, "correlation_from_factor: U must be upper-triangular");
    require(U_raw(i, i) > 0.0, "correlation_from_factor: nonpositive diagonal entry");
    double norm = U_raw.row(i).tail(n - i).norm();
    require(norm > 0.0, "correlation_from_factor: zero row");
    factor.U.row(i).tail(n - i) = U_raw.row(i).tail(n - i) / norm;
  }
  return {factor, factor.correlation()};
}

Eigen::MatrixXd correlation_from_rho(double rho) {
  if (!(rho > -1.0 && rho < 1.0))
    throw std::invalid_argument("correlation_from_rho: rho outside (-1,1)");
  Eigen::MatrixXd R(2, 2);
  R << 1.0, rho, rho, 1.0;
  return R;
}

SeriesData apply_missingness(const SeriesData& data, const BoolMask& mask) {
  require(mask.rows() == data.y.rows() && mask.cols() == data.y.cols(),
          "apply_missingness: mask shape mismatch");
  SeriesData out = data;
  out.observed = data.observed && mask;
  return out;
}

}  // namespace garchssm
