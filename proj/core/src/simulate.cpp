#include <cmath>
#include <stdexcept>

#include "garchssm/model.hpp"

namespace garchssm {

std::pair<SeriesData, SimulationTruth> simulate(const ModelSpec& spec, const GarchParams& garch,
                                                const Eigen::MatrixXd& R, const StateCov& W,
                                                Eigen::Index T, std::uint64_t seed) {
  spec.validate();
  garch.validate();
  if (!W.W.isApprox(W.W.transpose(), 1e-10))
    throw std::invalid_argument("simulate: W must be symmetric");
  if (T < 1) throw std::invalid_argument("simulate: T must be >= 1");
  const Eigen::Index n = spec.n();
  const Eigen::Index r = spec.r();
  if (garch.n_series() != n || R.rows() != n || R.cols() != n || W.W.rows() != r)
    throw std::invalid_argument("simulate: dimension mismatch");
  const int p = garch.p();
  const int q = garch.q();

  Rng rng(seed);
  SimulationTruth truth;
  truth.states.resize(T + 1, r);
  truth.sigma.resize(T, n);
  truth.z.resize(T, n);

  truth.states.row(0) = mvn_draw(spec.m0, spec.C0, rng).transpose();

  Eigen::VectorXd sigma0(n);
  for (Eigen::Index i = 0; i < n; ++i) sigma0[i] = garch.unconditional_variance(i);

  SeriesData data;
  data.y.resize(T, n);
  data.observed = BoolMask::Constant(T, n, true);

  for (Eigen::Index t = 0; t < T; ++t) {
    Eigen::VectorXd sigma2(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      double s2 = garch.alpha0[i];
      for (int j = 1; j <= p; ++j) {
        // lags before the sample start fall back to the pre-sample variance
        double z2 = (t - j >= 0) ? truth.z(t - j, i) * truth.z(t - j, i) : sigma0[i];
        s2 += garch.alpha[i][j - 1] * z2;
      }
      for (int j = 1; j <= q; ++j) {
        double s2lag = (t - j >= 0) ? truth.sigma(t - j, i) * truth.sigma(t - j, i) : sigma0[i];
        s2 += garch.beta[i][j - 1] * s2lag;
      }
      sigma2[i] = s2;
    }
    truth.sigma.row(t) = sigma2.array().sqrt().matrix().transpose();

    Eigen::VectorXd state = spec.G * truth.states.row(t).transpose();
    if (!W.W.isZero(0.0)) {
      state = mvn_draw(state, W.W, rng);
    }
    truth.states.row(t + 1) = state.transpose();

    Eigen::MatrixXd V = build_observation_cov(truth.sigma.row(t).transpose(), R);
    Eigen::VectorXd z = mvn_draw(Eigen::VectorXd::Zero(n), V, rng);
    truth.z.row(t) = z.transpose();
    data.y.row(t) = (spec.Fprime * state + z).transpose();
  }
  return {data, truth};
}

}  // namespace garchssm
