#include "garchssm/sampler.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <thread>

namespace garchssm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kTargetAcceptance = 0.3;

double half_cauchy_draw(double scale, Rng& rng, double cap) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int k = 0; k < 1000; ++k) {
    double x = scale * std::tan(M_PI * unif(rng) / 2.0);
    if (x < cap) return x;
  }
  return scale;
}

double log_garch_prior(const GarchParams& params, const PriorSpec& prior) {
  if (!params.is_valid()) return kNegInf;
  double lp = 0.0;
  for (Eigen::Index i = 0; i < params.n_series(); ++i) {
    lp += log_half_cauchy(params.alpha0[i], prior.cauchy_scale_alpha0);
    for (double a : params.alpha[i]) lp += log_half_cauchy(a, prior.cauchy_scale_ab);
    for (double b : params.beta[i]) lp += log_half_cauchy(b, prior.cauchy_scale_ab);
  }
  return lp;
}

double chain_loglik(const SeriesData& data, const ModelSpec& spec, const GarchParams& garch,
                    const Eigen::MatrixXd& R, const StateCov& W) {
  return kalman_filter(data, spec, garch, R, W).loglik;
}

// Constant-V benchmark reuses the GARCH filter with zero loadings.
GarchParams garch_from_constant_V(const Eigen::MatrixXd& V) {
  GarchParams g = GarchParams::zeros(V.rows(), 1, 1);
  for (Eigen::Index i = 0; i < V.rows(); ++i) g.alpha0[i] = V(i, i);
  return g;
}

Eigen::MatrixXd correlation_of_cov(const Eigen::MatrixXd& V) {
  Eigen::VectorXd d = V.diagonal().array().sqrt().inverse();
  return d.asDiagonal() * V * d.asDiagonal();
}

// Robbins-Monro step-size adaptation toward the target acceptance rate.
void adapt_step(double& sd, bool accepted, int iter) {
  double gamma = 1.0 / std::pow(static_cast<double>(iter) + 1.0, 0.6);
  sd *= std::exp(gamma * ((accepted ? 1.0 : 0.0) - kTargetAcceptance));
  sd = std::clamp(sd, 1e-6, 10.0);
}

}  // namespace

CorrelationState CorrelationState::identity(Eigen::Index n_) {
  CorrelationState c;
  c.n = n_;
  c.rho = 0.0;
  c.U_raw = Eigen::MatrixXd::Identity(n_, n_);
  return c;
}

Eigen::MatrixXd CorrelationState::correlation() const {
  if (n == 1) return Eigen::MatrixXd::Identity(1, 1);
  if (n == 2) return correlation_from_rho(rho);
  return correlation_from_factor(U_raw).second;
}

double CorrelationState::log_prior(const PriorSpec& prior) const {
  if (n <= 1) return 0.0;
  if (n == 2) return (rho > -1.0 && rho < 1.0) ? 0.0 : kNegInf;
  double lp = 0.0;
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    if (!(U_raw(i, i) > 0.0)) return kNegInf;
    lp += log_half_cauchy(U_raw(i, i), prior.cauchy_scale_udiag);
    for (Eigen::Index j = i + 1; j < n; ++j)
      lp += log_normal_pdf(U_raw(i, j), 0.0, prior.normal_sd_uoffdiag);
  }
  return lp;
}

Eigen::MatrixXd ffbs(const FilterOutput& filter, const ModelSpec& spec, const StateCov& W,
                     Rng& rng) {
  const Eigen::Index T = static_cast<Eigen::Index>(filter.steps.size());
  const Eigen::Index r = spec.r();
  if (T < 1) throw std::invalid_argument("ffbs: empty filter output");
  Eigen::MatrixXd states(T + 1, r);

  const FilterStep& last = filter.steps[T - 1];
  states.row(T) = mvn_draw(last.m, last.C, rng).transpose();

  for (Eigen::Index u = T - 1; u >= 0; --u) {
    const Eigen::VectorXd& m_u = (u == 0) ? spec.m0 : filter.steps[u - 1].m;
    const Eigen::MatrixXd& C_u = (u == 0) ? spec.C0 : filter.steps[u - 1].C;
    const FilterStep& next = filter.steps[u];  // time u+1

    Eigen::LLT<Eigen::MatrixXd> llt(next.P);
    if (llt.info() != Eigen::Success) {
      Eigen::MatrixXd jit = next.P + 1e-10 * Eigen::MatrixXd::Identity(r, r);
      llt.compute(jit);
      if (llt.info() != Eigen::Success)
        throw std::runtime_error("ffbs: predicted covariance not PD at t=" + std::to_string(u + 1));
    }
    Eigen::MatrixXd CGt = C_u * spec.G.transpose();       // r x r
    Eigen::MatrixXd gain = llt.solve(CGt.transpose()).transpose();  // C G' P^{-1}
    Eigen::VectorXd resid = states.row(u + 1).transpose() - next.a;
    Eigen::VectorXd h = m_u + gain * resid;
    Eigen::MatrixXd H = C_u - gain * spec.G * C_u;
    H = 0.5 * (H + H.transpose());
    states.row(u) = mvn_draw(h, H, rng).transpose();
  }
  return states;
}

Eigen::MatrixXd sample_W_conjugate(const Eigen::MatrixXd& states, const ModelSpec& spec,
                                   const PriorSpec& prior, Rng& rng) {
  const Eigen::Index r = spec.r();
  if (states.cols() != r) throw std::invalid_argument("sample_W_conjugate: state dim mismatch");
  const Eigen::Index T = states.rows() - 1;
  Eigen::MatrixXd S = prior.iw_scale * Eigen::MatrixXd::Identity(r, r);
  for (Eigen::Index t = 1; t <= T; ++t) {
    Eigen::VectorXd innov =
        states.row(t).transpose() - spec.G * states.row(t - 1).transpose();
    S += innov * innov.transpose();
  }
  return inverse_wishart_draw(prior.iw_df + static_cast<double>(T), S, rng);
}

bool mh_update_garch(Eigen::Index series, GarchParams& params, double& loglik,
                     const SeriesData& data, const ModelSpec& spec, const Eigen::MatrixXd& R,
                     const StateCov& W, const PriorSpec& prior,
                     const Eigen::MatrixXd& proposal_chol, Rng& rng) {
  // Random walk in (log alpha0, alpha..., beta...): the log scale keeps the
  // level parameter positive and decouples it from the persistence ridge.
  std::normal_distribution<double> std_normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  const Eigen::Index d = proposal_chol.rows();
  Eigen::VectorXd z(d);
  for (Eigen::Index k = 0; k < d; ++k) z[k] = std_normal(rng);
  Eigen::VectorXd delta = proposal_chol * z;

  GarchParams proposal = params;
  proposal.alpha0[series] *= std::exp(delta[0]);
  Eigen::Index k = 1;
  for (double& a : proposal.alpha[series]) a += delta[k++];
  for (double& b : proposal.beta[series]) b += delta[k++];

  double lp_new = log_garch_prior(proposal, prior);
  if (lp_new == kNegInf) return false;
  double lp_cur = log_garch_prior(params, prior);
  double ll_new = chain_loglik(data, spec, proposal, R, W);
  // delta[0] is the log-scale proposal Jacobian
  double log_ratio = (ll_new + lp_new) - (loglik + lp_cur) + delta[0];
  if (std::log(unif(rng)) < log_ratio) {
    params = proposal;
    loglik = ll_new;
    return true;
  }
  return false;
}

bool mh_update_garch(Eigen::Index series, GarchParams& params, double& loglik,
                     const SeriesData& data, const ModelSpec& spec, const Eigen::MatrixXd& R,
                     const StateCov& W, const PriorSpec& prior, double proposal_sd, Rng& rng) {
  const Eigen::Index d = 1 + static_cast<Eigen::Index>(params.p() + params.q());
  Eigen::MatrixXd L = proposal_sd * Eigen::MatrixXd::Identity(d, d);
  return mh_update_garch(series, params, loglik, data, spec, R, W, prior, L, rng);
}

bool mh_update_correlation(CorrelationState& corr, double& loglik, const SeriesData& data,
                           const ModelSpec& spec, const GarchParams& garch, const StateCov& W,
                           const PriorSpec& prior, double proposal_sd, Rng& rng) {
  if (corr.n <= 1) return true;
  std::normal_distribution<double> step(0.0, proposal_sd);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  CorrelationState proposal = corr;
  if (corr.n == 2) {
    proposal.rho += step(rng);
  } else {
    for (Eigen::Index i = 0; i + 1 < corr.n; ++i)
      for (Eigen::Index j = i; j < corr.n; ++j) proposal.U_raw(i, j) += step(rng);
  }
  double lp_new = proposal.log_prior(prior);
  if (lp_new == kNegInf) return false;
  double lp_cur = corr.log_prior(prior);
  double ll_new = chain_loglik(data, spec, garch, proposal.correlation(), W);
  double log_ratio = (ll_new + lp_new) - (loglik + lp_cur);
  if (std::log(unif(rng)) < log_ratio) {
    corr = proposal;
    loglik = ll_new;
    return true;
  }
  return false;
}

Eigen::MatrixXd impute_missing(const Eigen::MatrixXd& states, const ModelSpec& spec,
                               const GarchParams& garch, const Eigen::MatrixXd& R,
                               const SeriesData& data, Rng& rng) {
  const Eigen::Index T = data.T();
  const Eigen::Index n = data.n();
  const int p = garch.p();
  const int q = garch.q();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  Eigen::MatrixXd out = Eigen::MatrixXd::Constant(T, n, nan);

  // sigma path driven by the state-conditional errors; missing squared errors
  // fall back to their conditional expectation sigma^2
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

    std::vector<Eigen::Index> miss, obs;
    for (Eigen::Index i = 0; i < n; ++i)
      (data.observed(t, i) ? obs : miss).push_back(i);
    if (miss.empty()) continue;

    Eigen::MatrixXd V = build_observation_cov(sigma2.row(t).array().sqrt().matrix().transpose(), R);
    const auto nm = static_cast<Eigen::Index>(miss.size());
    const auto no = static_cast<Eigen::Index>(obs.size());
    Eigen::VectorXd mu_m(nm), cond_mean(nm);
    Eigen::MatrixXd V_mm(nm, nm);
    for (Eigen::Index a = 0; a < nm; ++a) {
      mu_m[a] = mean[miss[a]];
      for (Eigen::Index b = 0; b < nm; ++b) V_mm(a, b) = V(miss[a], miss[b]);
    }
    Eigen::MatrixXd cond_cov = V_mm;
    cond_mean = mu_m;
    if (no > 0) {
      Eigen::MatrixXd V_mo(nm, no), V_oo(no, no);
      Eigen::VectorXd resid_o(no);
      for (Eigen::Index a = 0; a < nm; ++a)
        for (Eigen::Index b = 0; b < no; ++b) V_mo(a, b) = V(miss[a], obs[b]);
      for (Eigen::Index a = 0; a < no; ++a) {
        resid_o[a] = data.y(t, obs[a]) - mean[obs[a]];
        for (Eigen::Index b = 0; b < no; ++b) V_oo(a, b) = V(obs[a], obs[b]);
      }
      Eigen::LLT<Eigen::MatrixXd> llt(V_oo);
      if (llt.info() != Eigen::Success)
        throw std::runtime_error("impute_missing: observed block not PD at t=" +
                                 std::to_string(t + 1));
      cond_mean = mu_m + V_mo * llt.solve(resid_o);
      cond_cov = V_mm - V_mo * llt.solve(V_mo.transpose());
      cond_cov = 0.5 * (cond_cov + cond_cov.transpose());
    }
    Eigen::VectorXd draw = mvn_draw(cond_mean, cond_cov, rng);
    for (Eigen::Index a = 0; a < nm; ++a) out(t, miss[a]) = draw[a];
  }
  return out;
}

Eigen::VectorXd derived_state_correlation(const Eigen::MatrixXd& W) {
  const Eigen::Index r = W.rows();
  if (r < 2) throw std::invalid_argument("derived_state_correlation: r must be >= 2");
  Eigen::VectorXd rho(r * (r - 1) / 2);
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = i + 1; j < r; ++j)
      rho[k++] = W(i, j) / std::sqrt(W(i, i) * W(j, j));
  return rho;
}

PosteriorDraws run_chain(const SeriesData& data, const FitSpec& fit, const PriorSpec& prior,
                         const McmcConfig& config, std::uint64_t chain_seed, int chain_id) {
  data.validate();
  fit.spec.validate();
  const Eigen::Index n = fit.spec.n();
  const Eigen::Index r = fit.spec.r();
  const Eigen::Index T = data.T();
  Rng rng(chain_seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  const int keep = std::max(0, config.n_keep / std::max(1, config.n_chains));
  const int total_iters = config.burn_in + keep * config.thin;

  PosteriorDraws out;
  out.pointwise_lp.resize(keep, T);

  // initial values drawn from the priors, restricted to the constraint set
  GarchParams garch = GarchParams::zeros(n, fit.p, fit.q);
  CorrelationState corr = CorrelationState::identity(n);
  Eigen::MatrixXd W =
      inverse_wishart_draw(prior.iw_df, prior.iw_scale * Eigen::MatrixXd::Identity(r, r), rng);
  Eigen::MatrixXd V;

  if (fit.garch_enabled) {
    for (Eigen::Index i = 0; i < n; ++i) {
      garch.alpha0[i] = half_cauchy_draw(prior.cauchy_scale_alpha0, rng, 10.0 * prior.cauchy_scale_alpha0);
      for (int k = 0; k < 1000; ++k) {
        for (auto& a : garch.alpha[i]) a = half_cauchy_draw(prior.cauchy_scale_ab, rng, 1.0);
        for (auto& b : garch.beta[i]) b = half_cauchy_draw(prior.cauchy_scale_ab, rng, 1.0);
        if (garch.loading_sum(i) < 1.0) break;
        if (k == 999) {
          for (auto& a : garch.alpha[i]) a = 0.1;
          for (auto& b : garch.beta[i]) b = 0.1;
        }
      }
    }
    if (n == 2) {
      corr.rho = 2.0 * unif(rng) - 1.0;
    } else if (n > 2) {
      std::normal_distribution<double> offd(0.0, prior.normal_sd_uoffdiag);
      for (Eigen::Index i = 0; i + 1 < n; ++i) {
        corr.U_raw(i, i) = half_cauchy_draw(prior.cauchy_scale_udiag, rng, 10.0 * prior.cauchy_scale_udiag);
        for (Eigen::Index j = i + 1; j < n; ++j) corr.U_raw(i, j) = offd(rng);
      }
    }
  } else {
    V = inverse_wishart_draw(prior.iw_df, prior.iw_scale * Eigen::MatrixXd::Identity(n, n), rng);
  }

  // per-block adaptive proposal scales
  std::vector<double> sd_garch(n, config.proposal_sd_garch);
  double sd_corr = config.proposal_sd_corr;
  std::vector<long> acc_garch(n, 0);
  long acc_corr = 0, count_post = 0;

  // Adaptive-Metropolis state for the GARCH blocks: running mean/scatter of
  // (log alpha0, alpha, beta) collected during burn-in (Welford), used to
  // orient the proposal along the level/persistence ridge once enough history
  // exists. Adaptation stops at the end of burn-in, so the sampling-phase
  // kernel is a fixed Markov kernel.
  const Eigen::Index d_block = 1 + static_cast<Eigen::Index>(fit.p + fit.q);
  const int am_warmup = 500;
  long am_count = 0;
  std::vector<Eigen::VectorXd> am_mean(n, Eigen::VectorXd::Zero(d_block));
  std::vector<Eigen::MatrixXd> am_m2(n, Eigen::MatrixXd::Zero(d_block, d_block));
  std::vector<double> am_scale(n, 2.38 / std::sqrt(static_cast<double>(d_block)));
  auto block_coords = [&](Eigen::Index i) {
    Eigen::VectorXd u(d_block);
    u[0] = std::log(garch.alpha0[i]);
    Eigen::Index k = 1;
    for (double a : garch.alpha[i]) u[k++] = a;
    for (double b : garch.beta[i]) u[k++] = b;
    return u;
  };
  auto block_proposal_chol = [&](Eigen::Index i) {
    if (am_count <= 2 * d_block)
      return Eigen::MatrixXd(sd_garch[i] * Eigen::MatrixXd::Identity(d_block, d_block));
    Eigen::MatrixXd cov = am_m2[i] / static_cast<double>(am_count - 1) +
                          1e-8 * Eigen::MatrixXd::Identity(d_block, d_block);
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success)
      return Eigen::MatrixXd(sd_garch[i] * Eigen::MatrixXd::Identity(d_block, d_block));
    return Eigen::MatrixXd(am_scale[i] * Eigen::MatrixXd(llt.matrixL()));
  };

  const bool has_missing = !data.observed.all();
  int stored = 0;

  for (int iter = 0; iter < total_iters; ++iter) {
    const bool post = iter >= config.burn_in;

    if (fit.garch_enabled) {
      double loglik = chain_loglik(data, fit.spec, garch, corr.correlation(), {W});
      for (Eigen::Index i = 0; i < n; ++i) {
        const bool am_active = am_count > 2 * d_block;
        bool acc = mh_update_garch(i, garch, loglik, data, fit.spec, corr.correlation(), {W},
                                   prior, block_proposal_chol(i), rng);
        if (config.adapt && !post)
          adapt_step(am_active ? am_scale[i] : sd_garch[i], acc, iter);
        if (post) acc_garch[i] += acc ? 1 : 0;
      }
      if (config.adapt && !post && iter >= am_warmup) {
        ++am_count;
        for (Eigen::Index i = 0; i < n; ++i) {
          Eigen::VectorXd u = block_coords(i);
          Eigen::VectorXd delta = u - am_mean[i];
          am_mean[i] += delta / static_cast<double>(am_count);
          am_m2[i] += delta * (u - am_mean[i]).transpose();
        }
      }
      if (n >= 2) {
        bool acc = mh_update_correlation(corr, loglik, data, fit.spec, garch, {W}, prior,
                                         sd_corr, rng);
        if (config.adapt && !post) adapt_step(sd_corr, acc, iter);
        if (post) acc_corr += acc ? 1 : 0;
      }
    }
    if (post) ++count_post;

    Eigen::MatrixXd R_cur = fit.garch_enabled ? corr.correlation() : correlation_of_cov(V);
    GarchParams garch_cur = fit.garch_enabled ? garch : garch_from_constant_V(V);

    FilterOutput filt = kalman_filter(data, fit.spec, garch_cur, R_cur, {W});
    Eigen::MatrixXd states = ffbs(filt, fit.spec, {W}, rng);

    Eigen::MatrixXd imput;
    if (has_missing && (config.impute || !fit.garch_enabled))
      imput = impute_missing(states, fit.spec, garch_cur, R_cur, data, rng);

    if (!fit.garch_enabled) {
      // conjugate IW update of the constant observation covariance, using the
      // completed errors
      Eigen::MatrixXd S = prior.iw_scale * Eigen::MatrixXd::Identity(n, n);
      for (Eigen::Index t = 0; t < T; ++t) {
        Eigen::VectorXd z =
            data.y.row(t).transpose() - fit.spec.Fprime * states.row(t + 1).transpose();
        if (has_missing)
          for (Eigen::Index i = 0; i < n; ++i)
            if (!data.observed(t, i))
              z[i] = imput(t, i) -
                     (fit.spec.Fprime.row(i) * states.row(t + 1).transpose()).value();
        S += z * z.transpose();
      }
      V = inverse_wishart_draw(prior.iw_df + static_cast<double>(T), S, rng);
    }

    W = sample_W_conjugate(states, fit.spec, prior, rng);

    if (post && (iter - config.burn_in) % config.thin == config.thin - 1 && stored < keep) {
      ParamDraw d;
      d.chain = chain_id;
      d.W = W;
      if (fit.garch_enabled) {
        d.garch = garch;
        d.R = corr.correlation();
      } else {
        d.V = V;
        d.R = correlation_of_cov(V);
        d.garch = garch_from_constant_V(V);
      }
      // pointwise predictive at the stored parameter draw, states marginalized
      FilterOutput f2 = kalman_filter(data, fit.spec, d.garch, d.R, {W});
      out.pointwise_lp.row(stored) = f2.pointwise.transpose();
      out.draws.push_back(std::move(d));
      if (config.save_states) out.states.push_back(states);
      if (has_missing && config.impute) out.imputations.push_back(imput);
      ++stored;
    }
  }

  if (count_post > 0) {
    for (Eigen::Index i = 0; i < n; ++i)
      out.acceptance_rates["garch_" + std::to_string(i + 1)] =
          static_cast<double>(acc_garch[i]) / static_cast<double>(count_post);
    if (fit.garch_enabled && n >= 2)
      out.acceptance_rates["correlation"] =
          static_cast<double>(acc_corr) / static_cast<double>(count_post);
  }
  return out;
}

PosteriorDraws run_chains_parallel(const SeriesData& data, const FitSpec& fit,
                                   const PriorSpec& prior, const McmcConfig& config) {
  const int n_chains = std::max(1, config.n_chains);
  std::vector<PosteriorDraws> results(n_chains);
  std::vector<std::string> errors(n_chains);

  auto run_one = [&](int c) {
    Rng seeder(config.seed + 0x9E3779B97F4A7C15ull * static_cast<std::uint64_t>(c + 1));
    std::uint64_t chain_seed = seeder();
    try {
      results[c] = run_chain(data, fit, prior, config, chain_seed, c + 1);
    } catch (const std::exception& ex) {
      errors[c] = "chain " + std::to_string(c + 1) + ": " + ex.what();
    }
  };

  const int workers = std::clamp(config.n_threads, 1, n_chains);
  if (workers == 1) {
    for (int c = 0; c < n_chains; ++c) run_one(c);
  } else {
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (int c = next.fetch_add(1); c < n_chains; c = next.fetch_add(1)) run_one(c);
      });
    for (auto& th : pool) th.join();
  }

  PosteriorDraws merged;
  Eigen::Index T = data.T();
  std::size_t total = 0;
  for (const auto& res : results) total += res.size();
  merged.pointwise_lp.resize(static_cast<Eigen::Index>(total), T);
  Eigen::Index row = 0;
  int ok_chains = 0;
  for (int c = 0; c < n_chains; ++c) {
    if (!errors[c].empty()) {
      merged.chain_errors.push_back(errors[c]);
      continue;
    }
    const auto& res = results[c];
    for (std::size_t s = 0; s < res.size(); ++s) {
      merged.draws.push_back(res.draws[s]);
      merged.pointwise_lp.row(row++) = res.pointwise_lp.row(static_cast<Eigen::Index>(s));
    }
    for (const auto& st : res.states) merged.states.push_back(st);
    for (const auto& im : res.imputations) merged.imputations.push_back(im);
    for (const auto& [k, v] : res.acceptance_rates) merged.acceptance_rates[k] += v;
    ++ok_chains;
  }
  if (ok_chains == 0 && !merged.chain_errors.empty())
    throw std::runtime_error("run_chains_parallel: all chains failed; first error: " +
                             merged.chain_errors.front());
  for (auto& [k, v] : merged.acceptance_rates) v /= std::max(1, ok_chains);
  return merged;
}

std::pair<std::vector<std::string>, Eigen::MatrixXd> flatten_draws(const PosteriorDraws& draws,
                                                                   const FitSpec& fit) {
  const Eigen::Index n = fit.spec.n();
  const Eigen::Index r = fit.spec.r();
  std::vector<std::string> names;
  if (fit.garch_enabled) {
    for (Eigen::Index i = 0; i < n; ++i) {
      names.push_back("alpha0_" + std::to_string(i + 1));
      for (int j = 1; j <= fit.p; ++j)
        names.push_back("alpha" + std::to_string(j) + "_" + std::to_string(i + 1));
      for (int j = 1; j <= fit.q; ++j)
        names.push_back("beta" + std::to_string(j) + "_" + std::to_string(i + 1));
    }
    if (n == 2) {
      names.push_back("rho");
    } else {
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j)
          names.push_back("rho_" + std::to_string(i + 1) + "_" + std::to_string(j + 1));
    }
  } else {
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = i; j < n; ++j)
        names.push_back("V_" + std::to_string(i + 1) + "_" + std::to_string(j + 1));
    if (n == 2) {
      names.push_back("rho_obs");
    } else if (n > 2) {
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j)
          names.push_back("rho_obs_" + std::to_string(i + 1) + "_" + std::to_string(j + 1));
    }
  }
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = i; j < r; ++j)
      names.push_back("W_" + std::to_string(i + 1) + "_" + std::to_string(j + 1));
  if (r >= 2) {
    for (Eigen::Index i = 0; i < r; ++i)
      for (Eigen::Index j = i + 1; j < r; ++j)
        names.push_back("rho_s_" + std::to_string(i + 1) + "_" + std::to_string(j + 1));
  }

  Eigen::MatrixXd flat(static_cast<Eigen::Index>(draws.size()),
                       static_cast<Eigen::Index>(names.size()));
  for (std::size_t s = 0; s < draws.size(); ++s) {
    const ParamDraw& d = draws.draws[s];
    Eigen::Index k = 0;
    if (fit.garch_enabled) {
      for (Eigen::Index i = 0; i < n; ++i) {
        flat(s, k++) = d.garch.alpha0[i];
        for (int j = 0; j < fit.p; ++j) flat(s, k++) = d.garch.alpha[i][j];
        for (int j = 0; j < fit.q; ++j) flat(s, k++) = d.garch.beta[i][j];
      }
      if (n == 2) {
        flat(s, k++) = d.R(0, 1);
      } else {
        for (Eigen::Index i = 0; i < n; ++i)
          for (Eigen::Index j = i + 1; j < n; ++j) flat(s, k++) = d.R(i, j);
      }
    } else {
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i; j < n; ++j) flat(s, k++) = d.V(i, j);
      if (n >= 2) {
        for (Eigen::Index i = 0; i < n; ++i)
          for (Eigen::Index j = i + 1; j < n; ++j)
            flat(s, k++) = d.V(i, j) / std::sqrt(d.V(i, i) * d.V(j, j));
      }
    }
    for (Eigen::Index i = 0; i < r; ++i)
      for (Eigen::Index j = i; j < r; ++j) flat(s, k++) = d.W(i, j);
    if (r >= 2) {
      Eigen::VectorXd rho_s = derived_state_correlation(d.W);
      for (Eigen::Index i = 0; i < rho_s.size(); ++i) flat(s, k++) = rho_s[i];
    }
  }
  return {names, flat};
}

}  // namespace garchssm
