#include "garchssm/filter.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace garchssm {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

Eigen::LLT<Eigen::MatrixXd> factor_with_jitter(const Eigen::MatrixXd& M, Eigen::Index t,
                                               const char* what) {
  Eigen::LLT<Eigen::MatrixXd> llt(M);
  if (llt.info() == Eigen::Success) return llt;
  Eigen::MatrixXd jittered = M + 1e-10 * Eigen::MatrixXd::Identity(M.rows(), M.cols());
  Eigen::LLT<Eigen::MatrixXd> llt2(jittered);
  if (llt2.info() == Eigen::Success) return llt2;
  throw std::runtime_error(std::string(what) + " not positive definite at t=" +
                           std::to_string(t + 1));
}

}  // namespace

FilterOutput kalman_filter(const SeriesData& data, const ModelSpec& spec,
                           const GarchParams& garch, const Eigen::MatrixXd& R,
                           const StateCov& W) {
  spec.validate();
  garch.validate();
  data.validate();
  const Eigen::Index T = data.T();
  const Eigen::Index n = spec.n();
  const Eigen::Index r = spec.r();
  if (data.n() != n || garch.n_series() != n || R.rows() != n || R.cols() != n ||
      W.W.rows() != r || W.W.cols() != r)
    throw std::invalid_argument("kalman_filter: dimension mismatch");
  const int p = garch.p();
  const int q = garch.q();

  Eigen::VectorXd sigma0(n);
  for (Eigen::Index i = 0; i < n; ++i) sigma0[i] = garch.unconditional_variance(i);

  FilterOutput out;
  out.steps.resize(T);
  out.pointwise.resize(T);

  // Filtered moments of y at each past step, cached for the S^2 recursion:
  // Fm = F'm, Fdiag = diag(F'(C + m m')F), Qdiag = diag(Q).
  Eigen::MatrixXd fm_hist(T, n), fdiag_hist(T, n), qdiag_hist(T, n);

  Eigen::VectorXd m_prev = spec.m0;
  Eigen::MatrixXd C_prev = spec.C0;

  for (Eigen::Index t = 0; t < T; ++t) {
    FilterStep& st = out.steps[t];
    st.a = spec.G * m_prev;
    st.P = spec.G * C_prev * spec.G.transpose() + W.W;
    st.P = 0.5 * (st.P + st.P.transpose());

    // GARCH variance recursion over filtered quantities.
    st.S2.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      double s2 = garch.alpha0[i];
      for (int j = 1; j <= p; ++j) {
        const Eigen::Index tl = t - j;
        double term;
        if (tl < 0) {
          term = sigma0[i];
        } else if (data.observed(tl, i)) {
          const double y = data.y(tl, i);
          term = y * y - 2.0 * y * fm_hist(tl, i) + fdiag_hist(tl, i);
        } else {
          // E[z^2] under the model when y is unavailable
          term = qdiag_hist(tl, i);
        }
        s2 += garch.alpha[i][j - 1] * std::max(term, 0.0);
      }
      for (int j = 1; j <= q; ++j) {
        const Eigen::Index tl = t - j;
        s2 += garch.beta[i][j - 1] * (tl < 0 ? sigma0[i] : out.steps[tl].S2[i]);
      }
      st.S2[i] = s2;
    }

    Eigen::VectorXd S = st.S2.array().sqrt();
    st.f = spec.Fprime * st.a;
    st.Q = S.asDiagonal() * R * S.asDiagonal() + spec.Fprime * st.P * spec.Fprime.transpose();
    st.Q = 0.5 * (st.Q + st.Q.transpose());

    std::vector<Eigen::Index> obs;
    obs.reserve(n);
    for (Eigen::Index i = 0; i < n; ++i)
      if (data.observed(t, i)) obs.push_back(i);
    const Eigen::Index k = static_cast<Eigen::Index>(obs.size());

    st.e = Eigen::VectorXd::Zero(n);
    st.K = Eigen::MatrixXd::Zero(r, n);

    if (k == 0) {
      st.m = st.a;
      st.C = st.P;
      st.logpred = 0.0;
    } else {
      Eigen::MatrixXd F_obs(k, r);   // observed rows of F'
      Eigen::VectorXd e_obs(k);
      Eigen::MatrixXd Q_obs(k, k);
      for (Eigen::Index ii = 0; ii < k; ++ii) {
        F_obs.row(ii) = spec.Fprime.row(obs[ii]);
        e_obs[ii] = data.y(t, obs[ii]) - st.f[obs[ii]];
        for (Eigen::Index jj = 0; jj < k; ++jj) Q_obs(ii, jj) = st.Q(obs[ii], obs[jj]);
      }
      auto llt = factor_with_jitter(Q_obs, t, "kalman_filter: forecast covariance");

      Eigen::MatrixXd PFt = st.P * F_obs.transpose();           // r x k
      Eigen::MatrixXd K_obs = llt.solve(PFt.transpose()).transpose();  // r x k
      st.m = st.a + K_obs * e_obs;
      st.C = st.P - K_obs * Q_obs * K_obs.transpose();
      st.C = 0.5 * (st.C + st.C.transpose());
      for (Eigen::Index ii = 0; ii < k; ++ii) {
        st.K.col(obs[ii]) = K_obs.col(ii);
        st.e[obs[ii]] = e_obs[ii];
      }
      double logdet = 2.0 * Eigen::MatrixXd(llt.matrixL()).diagonal().array().log().sum();
      double quad = e_obs.dot(llt.solve(e_obs));
      st.logpred = -0.5 * (static_cast<double>(k) * kLog2Pi + logdet + quad);
    }

    fm_hist.row(t) = (spec.Fprime * st.m).transpose();
    Eigen::MatrixXd second = st.C + st.m * st.m.transpose();
    fdiag_hist.row(t) =
        (spec.Fprime * second * spec.Fprime.transpose()).diagonal().transpose();
    qdiag_hist.row(t) = st.Q.diagonal().transpose();

    out.pointwise[t] = st.logpred;
    m_prev = st.m;
    C_prev = st.C;
  }
  out.loglik = out.pointwise.sum();
  return out;
}

std::vector<std::pair<Eigen::VectorXd, Eigen::MatrixXd>> one_step_forecasts(
    const FilterOutput& output) {
  std::vector<std::pair<Eigen::VectorXd, Eigen::MatrixXd>> fc;
  fc.reserve(output.steps.size());
  for (const auto& st : output.steps) fc.emplace_back(st.f, st.Q);
  return fc;
}

Eigen::VectorXd pointwise_log_predictive(const FilterOutput& output) { return output.pointwise; }

}  // namespace garchssm
