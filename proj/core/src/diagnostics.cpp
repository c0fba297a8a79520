#include "garchssm/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace garchssm {

WaicReport waic(const Eigen::MatrixXd& pointwise_lp) {
  const Eigen::Index S = pointwise_lp.rows();
  const Eigen::Index T = pointwise_lp.cols();
  if (S < 2) throw std::invalid_argument("waic: need at least 2 draws");
  if (!pointwise_lp.allFinite()) throw std::invalid_argument("waic: non-finite entries");

  WaicReport rep;
  rep.per_point.resize(T);
  const double logS = std::log(static_cast<double>(S));
  for (Eigen::Index t = 0; t < T; ++t) {
    double log_mean, mean_log;
    if ((pointwise_lp.col(t).array() == pointwise_lp(0, t)).all()) {
      // constant column: keep p_waic contributions exactly zero
      log_mean = mean_log = pointwise_lp(0, t);
    } else {
      log_mean = log_sum_exp(pointwise_lp.col(t)) - logS;
      mean_log = pointwise_lp.col(t).mean();
    }
    rep.lppd += log_mean;
    rep.p_waic += 2.0 * (log_mean - mean_log);
    rep.per_point[t] = log_mean - 2.0 * (log_mean - mean_log);
  }
  rep.waic = rep.lppd - rep.p_waic;
  return rep;
}

std::vector<ModelRank> compare_models(
    const std::vector<std::pair<std::string, WaicReport>>& reports) {
  if (reports.size() < 2) throw std::invalid_argument("compare_models: need at least 2 reports");
  const Eigen::Index T = reports.front().second.per_point.size();
  for (const auto& [name, rep] : reports)
    if (rep.per_point.size() != T)
      throw std::invalid_argument("compare_models: mismatched data lengths");

  std::vector<ModelRank> ranked;
  ranked.reserve(reports.size());
  for (const auto& [name, rep] : reports) ranked.push_back({name, rep.waic, 0.0});
  std::stable_sort(ranked.begin(), ranked.end(), [](const ModelRank& a, const ModelRank& b) {
    if (a.waic != b.waic) return a.waic > b.waic;
    return a.name < b.name;
  });
  for (auto& r : ranked) r.diff_to_best = ranked.front().waic - r.waic;
  return ranked;
}

Eigen::VectorXd ergodic_means(const Eigen::VectorXd& draws) {
  if (draws.size() == 0) throw std::invalid_argument("ergodic_means: empty input");
  Eigen::VectorXd trace(draws.size());
  double run = 0.0;
  for (Eigen::Index k = 0; k < draws.size(); ++k) {
    run += draws[k];
    trace[k] = run / static_cast<double>(k + 1);
  }
  return trace;
}

std::vector<SummaryRow> summarize(const std::vector<std::string>& names,
                                  const Eigen::MatrixXd& flat_draws) {
  if (flat_draws.rows() == 0) throw std::invalid_argument("summarize: empty draws");
  if (static_cast<Eigen::Index>(names.size()) != flat_draws.cols())
    throw std::invalid_argument("summarize: name count mismatch");
  std::vector<SummaryRow> rows;
  rows.reserve(names.size());
  for (Eigen::Index j = 0; j < flat_draws.cols(); ++j) {
    std::vector<double> col(flat_draws.col(j).data(), flat_draws.col(j).data() + flat_draws.rows());
    SummaryRow row;
    row.name = names[j];
    row.mean = flat_draws.col(j).mean();
    row.median = quantile(col, 0.5);
    double var = (flat_draws.col(j).array() - row.mean).square().sum() /
                 std::max<double>(1.0, static_cast<double>(flat_draws.rows() - 1));
    row.sd = std::sqrt(var);
    row.ci_lo = quantile(col, 0.025);
    row.ci_hi = quantile(col, 0.975);
    rows.push_back(row);
  }
  return rows;
}

ResidualReport residual_analysis(const SeriesData& data, const ModelSpec& spec,
                                 const GarchParams& garch, const Eigen::MatrixXd& R,
                                 const StateCov& W, const Eigen::MatrixXd& state_estimate) {
  const Eigen::Index T = data.T();
  const Eigen::Index n = data.n();
  if (state_estimate.rows() != T + 1 || state_estimate.cols() != spec.r())
    throw std::invalid_argument("residual_analysis: state estimate must be (T+1) x r");
  const double nan = std::numeric_limits<double>::quiet_NaN();

  // fitted sigma path from the filter at the point estimates
  FilterOutput filt = kalman_filter(data, spec, garch, R, W);

  ResidualReport rep;
  rep.raw = Eigen::MatrixXd::Constant(T, n, nan);
  rep.standardized = Eigen::MatrixXd::Constant(T, n, nan);
  for (Eigen::Index t = 0; t < T; ++t) {
    Eigen::VectorXd fitted = spec.Fprime * state_estimate.row(t + 1).transpose();
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!data.observed(t, i)) continue;
      double resid = data.y(t, i) - fitted[i];
      rep.raw(t, i) = resid;
      rep.standardized(t, i) = resid / std::sqrt(filt.steps[t].S2[i]);
    }
  }

  rep.qq.resize(n);
  rep.ks.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    std::vector<double> sample;
    for (Eigen::Index t = 0; t < T; ++t)
      if (data.observed(t, i)) sample.push_back(rep.standardized(t, i));
    std::sort(sample.begin(), sample.end());
    const auto N = sample.size();
    rep.qq[i].reserve(N);
    for (std::size_t k = 0; k < N; ++k) {
      double pq = (static_cast<double>(k) + 0.5) / static_cast<double>(N);
      rep.qq[i].emplace_back(normal_quantile(pq), sample[k]);
    }
    rep.ks[i] = sample.empty() ? KsResult{0.0, 1.0} : ks_test_normal(sample);
  }
  return rep;
}

namespace {

// Variance recursion driven by a sampled state path: squared residuals where
// observed, the conditional expectation sigma^2 where missing.
Eigen::MatrixXd sigma2_from_states(const Eigen::MatrixXd& states, const ModelSpec& spec,
                                   const GarchParams& garch, const SeriesData& data) {
  const Eigen::Index T = data.T();
  const Eigen::Index n = data.n();
  const int p = garch.p();
  const int q = garch.q();
  Eigen::MatrixXd sigma2(T, n), z2(T, n);
  Eigen::VectorXd sigma0(n);
  for (Eigen::Index i = 0; i < n; ++i) sigma0[i] = garch.unconditional_variance(i);
  for (Eigen::Index t = 0; t < T; ++t) {
    Eigen::VectorXd mean = spec.Fprime * states.row(t + 1).transpose();
    for (Eigen::Index i = 0; i < n; ++i) {
      double s2 = garch.alpha0[i];
      for (int j = 1; j <= p; ++j)
        s2 += garch.alpha[i][j - 1] * (t - j < 0 ? sigma0[i] : z2(t - j, i));
      for (int j = 1; j <= q; ++j)
        s2 += garch.beta[i][j - 1] * (t - j < 0 ? sigma0[i] : sigma2(t - j, i));
      sigma2(t, i) = s2;
      if (data.observed(t, i)) {
        double z = data.y(t, i) - mean[i];
        z2(t, i) = z * z;
      } else {
        z2(t, i) = s2;
      }
    }
  }
  return sigma2;
}

}  // namespace

VariancePath dynamic_variance_path(const PosteriorDraws& draws, const SeriesData& data,
                                   const FitSpec& fit) {
  if (draws.size() == 0) throw std::invalid_argument("dynamic_variance_path: no draws");
  const Eigen::Index T = data.T();
  const Eigen::Index n = data.n();
  const auto S = static_cast<Eigen::Index>(draws.size());

  // With saved state paths the band reflects both parameter and state/residual
  // uncertainty; otherwise fall back to the filtered sigma path per draw,
  // which carries parameter uncertainty only.
  const bool have_states = draws.states.size() == draws.draws.size();

  std::vector<Eigen::MatrixXd> sigma(n, Eigen::MatrixXd(S, T));  // draws x time
  for (Eigen::Index s = 0; s < S; ++s) {
    const ParamDraw& d = draws.draws[s];
    if (have_states) {
      Eigen::MatrixXd s2 = sigma2_from_states(draws.states[s], fit.spec, d.garch, data);
      for (Eigen::Index t = 0; t < T; ++t)
        for (Eigen::Index i = 0; i < n; ++i) sigma[i](s, t) = std::sqrt(s2(t, i));
      continue;
    }
    FilterOutput filt = kalman_filter(data, fit.spec, d.garch, d.R, {d.W});
    for (Eigen::Index t = 0; t < T; ++t)
      for (Eigen::Index i = 0; i < n; ++i) sigma[i](s, t) = std::sqrt(filt.steps[t].S2[i]);
  }

  VariancePath path;
  path.per_series.assign(n, Eigen::MatrixXd(T, 3));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index t = 0; t < T; ++t) {
      std::vector<double> col(sigma[i].col(t).data(), sigma[i].col(t).data() + S);
      path.per_series[i](t, 0) = sigma[i].col(t).mean();
      path.per_series[i](t, 1) = quantile(col, 0.025);
      path.per_series[i](t, 2) = quantile(col, 0.975);
    }
  }
  return path;
}

}  // namespace garchssm
