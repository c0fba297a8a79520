#include <doctest.h>

#include <cmath>
#include <numeric>

#include "garchssm/sampler.hpp"

using namespace garchssm;

namespace {

SeriesData make_data(Eigen::Index n, Eigen::Index T, ModelSpec& spec, GarchParams& g,
                     Eigen::MatrixXd& R, Eigen::MatrixXd& W, std::uint64_t seed = 13) {
  spec = build_random_walk_plus_noise(n);
  spec.C0 = Eigen::MatrixXd::Identity(n, n);
  g = GarchParams::zeros(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    g.alpha0[i] = 1.0;
    g.alpha[i][0] = 0.1;
    g.beta[i][0] = 0.7;
  }
  R = (n == 2) ? correlation_from_rho(0.3) : Eigen::MatrixXd::Identity(n, n);
  W = 0.1 * Eigen::MatrixXd::Identity(n, n);
  return simulate(spec, g, R, {W}, T, seed).first;
}

// Fixed-interval smoother means, written against the filter output directly.
std::vector<Eigen::VectorXd> rts_means(const FilterOutput& filt, const ModelSpec& spec) {
  const auto T = static_cast<Eigen::Index>(filt.steps.size());
  std::vector<Eigen::VectorXd> h(T + 1);
  h[T] = filt.steps[T - 1].m;
  for (Eigen::Index t = T - 1; t >= 0; --t) {
    const Eigen::VectorXd& m = (t == 0) ? spec.m0 : filt.steps[t - 1].m;
    const Eigen::MatrixXd& C = (t == 0) ? spec.C0 : filt.steps[t - 1].C;
    const FilterStep& next = filt.steps[t];
    Eigen::LLT<Eigen::MatrixXd> llt(next.P);
    REQUIRE(llt.info() == Eigen::Success);
    Eigen::MatrixXd J = llt.solve(spec.G * C).transpose();
    h[t] = m + J * (h[t + 1] - next.a);
  }
  return h;
}

}  // namespace

TEST_CASE("ffbs draw averages converge to the smoothed means") {
  ModelSpec spec;
  GarchParams g;
  Eigen::MatrixXd R, W;
  SeriesData data = make_data(2, 15, spec, g, R, W);
  // constant-variance case so the smoother is exact
  GarchParams flat = GarchParams::zeros(2);
  flat.alpha0 = {1.5, 0.8};

  FilterOutput filt = kalman_filter(data, spec, flat, R, {W});
  auto smoothed = rts_means(filt, spec);

  Rng rng(101);
  const int n_draws = 4000;
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(16, 2);
  for (int s = 0; s < n_draws; ++s) acc += ffbs(filt, spec, {W}, rng);
  acc /= static_cast<double>(n_draws);
  for (Eigen::Index t = 0; t <= 15; ++t)
    CHECK((acc.row(t).transpose() - smoothed[t]).cwiseAbs().maxCoeff() < 0.08);
}

TEST_CASE("ffbs shape and determinism") {
  ModelSpec spec;
  GarchParams g;
  Eigen::MatrixXd R, W;
  SeriesData data = make_data(1, 10, spec, g, R, W);
  FilterOutput filt = kalman_filter(data, spec, g, R, {W});

  Rng r1(5), r2(5);
  Eigen::MatrixXd s1 = ffbs(filt, spec, {W}, r1);
  Eigen::MatrixXd s2 = ffbs(filt, spec, {W}, r2);
  CHECK(s1.rows() == 11);
  CHECK(s1.cols() == 1);
  CHECK(s1 == s2);

  FilterOutput empty;
  CHECK_THROWS(ffbs(empty, spec, {W}, r1));
}

TEST_CASE("conjugate W update matches the inverse-Wishart mean") {
  ModelSpec spec = build_random_walk_plus_noise(2);
  PriorSpec prior;  // df 10, scale 10 I

  // fixed innovations
  const Eigen::Index T = 30;
  Eigen::MatrixXd states = Eigen::MatrixXd::Zero(T + 1, 2);
  Rng gen(3);
  std::normal_distribution<double> nd(0.0, 1.0);
  Eigen::MatrixXd S = 10.0 * Eigen::MatrixXd::Identity(2, 2);
  for (Eigen::Index t = 1; t <= T; ++t) {
    Eigen::Vector2d innov(nd(gen), 0.5 * nd(gen));
    states.row(t) = states.row(t - 1) + innov.transpose();
    S += innov * innov.transpose();
  }
  Eigen::MatrixXd expect = S / (prior.iw_df + static_cast<double>(T) - 2.0 - 1.0);

  Rng rng(7);
  Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(2, 2);
  const int n_draws = 20000;
  for (int s = 0; s < n_draws; ++s) mean += sample_W_conjugate(states, spec, prior, rng);
  mean /= static_cast<double>(n_draws);
  CHECK((mean - expect).cwiseAbs().maxCoeff() / expect.norm() < 0.02);

  // a single state row is a prior draw: mean = scale/(df - r - 1)
  Eigen::MatrixXd prior_states = Eigen::MatrixXd::Zero(1, 2);
  mean.setZero();
  for (int s = 0; s < n_draws; ++s) mean += sample_W_conjugate(prior_states, spec, prior, rng);
  mean /= static_cast<double>(n_draws);
  CHECK(mean(0, 0) == doctest::Approx(10.0 / 7.0).epsilon(0.03));
  CHECK(mean(1, 1) == doctest::Approx(10.0 / 7.0).epsilon(0.03));

  CHECK_THROWS(sample_W_conjugate(Eigen::MatrixXd::Zero(5, 3), spec, prior, rng));
}

TEST_CASE("garch MH mechanics") {
  ModelSpec spec;
  GarchParams g;
  Eigen::MatrixXd R, W;
  SeriesData data = make_data(1, 50, spec, g, R, W);
  PriorSpec prior;
  Rng rng(19);

  double loglik = kalman_filter(data, spec, g, R, {W}).loglik;

  // a zero-sd proposal is the current point and always accepts
  GarchParams before = g;
  CHECK(mh_update_garch(0, g, loglik, data, spec, R, {W}, prior, 0.0, rng));
  CHECK(g.alpha0 == before.alpha0);

  // under a wide proposal the retained state stays valid and consistent
  int accepts = 0;
  for (int it = 0; it < 300; ++it) {
    accepts += mh_update_garch(0, g, loglik, data, spec, R, {W}, prior, 0.3, rng) ? 1 : 0;
    CHECK(g.is_valid());
  }
  CHECK(accepts > 0);
  CHECK(accepts < 300);
  CHECK(loglik == doctest::Approx(kalman_filter(data, spec, g, R, {W}).loglik).epsilon(1e-12));
}

TEST_CASE("garch MH targets the marginal posterior (quadrature check)") {
  // T = 1 collapses the likelihood to a single Gaussian in the implied
  // pre-sample variance v = alpha0 / (1 - alpha1 - beta1):
  //   y_1 ~ N(0, v + c0 + w)
  ModelSpec spec = build_random_walk_plus_noise(1);
  spec.C0 << 1.0;
  const double w = 0.5, y1 = 1.5;
  Eigen::MatrixXd W = w * Eigen::MatrixXd::Identity(1, 1);
  Eigen::MatrixXd R = Eigen::MatrixXd::Identity(1, 1);
  SeriesData data;
  data.y = Eigen::MatrixXd::Constant(1, 1, y1);
  data.observed = BoolMask::Constant(1, 1, true);
  PriorSpec prior;

  // quadrature over the prior-CDF cube: u -> tan(pi u / 2) maps Uniform(0,1)
  // to half-Cauchy(1), so the integrand is just the likelihood
  const int n_grid = 200;
  auto node = [&](int k) { return std::tan(M_PI * (k + 0.5) / (2.0 * n_grid)); };
  std::vector<double> val(n_grid);
  for (int k = 0; k < n_grid; ++k) val[k] = node(k);

  std::vector<double> marg_a0(n_grid, 0.0);
  for (int k0 = 0; k0 < n_grid; ++k0) {
    double a0 = val[k0];
    double acc = 0.0;
    for (int k1 = 0; k1 < n_grid; ++k1) {
      for (int k2 = 0; k2 < n_grid; ++k2) {
        double s = val[k1] + val[k2];
        if (s >= 0.999) continue;
        double var = a0 / (1.0 - s) + 1.0 + w;
        acc += std::exp(-0.5 * y1 * y1 / var) / std::sqrt(var);
      }
    }
    marg_a0[k0] = acc;
  }
  double total = std::accumulate(marg_a0.begin(), marg_a0.end(), 0.0);
  double cum = 0.0, q_median = 0.0, p_below_1 = 0.0;
  for (int k = 0; k < n_grid; ++k) {
    double prev = cum;
    cum += marg_a0[k] / total;
    if (prev < 0.5 && cum >= 0.5) q_median = val[k];
    if (val[k] < 1.0) p_below_1 = cum;
  }

  GarchParams g = GarchParams::zeros(1);
  g.alpha[0][0] = 0.1;
  g.beta[0][0] = 0.1;
  Rng rng(41);
  double loglik = kalman_filter(data, spec, g, R, {W}).loglik;
  std::vector<double> a0_draws;
  a0_draws.reserve(400000);
  for (int it = 0; it < 400000; ++it) {
    mh_update_garch(0, g, loglik, data, spec, R, {W}, prior, 0.5, rng);
    a0_draws.push_back(g.alpha0[0]);
  }
  double mcmc_median = quantile(a0_draws, 0.5);
  double mcmc_p = static_cast<double>(std::count_if(a0_draws.begin(), a0_draws.end(),
                                                    [](double a) { return a < 1.0; })) /
                  static_cast<double>(a0_draws.size());
  CHECK(mcmc_median == doctest::Approx(q_median).epsilon(0.06));
  CHECK(mcmc_p == doctest::Approx(p_below_1).epsilon(0.04));
}

TEST_CASE("correlation MH keeps rho inside the unit interval") {
  ModelSpec spec;
  GarchParams g;
  Eigen::MatrixXd R, W;
  SeriesData data = make_data(2, 60, spec, g, R, W);
  PriorSpec prior;
  Rng rng(9);

  CorrelationState corr = CorrelationState::identity(2);
  double loglik = kalman_filter(data, spec, g, corr.correlation(), {W}).loglik;
  int accepts = 0;
  for (int it = 0; it < 400; ++it) {
    accepts += mh_update_correlation(corr, loglik, data, spec, g, {W}, prior, 0.3, rng) ? 1 : 0;
    CHECK(corr.rho > -1.0);
    CHECK(corr.rho < 1.0);
  }
  CHECK(accepts > 0);
  CHECK(loglik ==
        doctest::Approx(kalman_filter(data, spec, g, corr.correlation(), {W}).loglik)
            .epsilon(1e-12));

  // n = 3 walks the factor entries; R stays a valid correlation matrix
  SeriesData data3 = make_data(3, 40, spec, g, R, W, 55);
  CorrelationState corr3 = CorrelationState::identity(3);
  double ll3 = kalman_filter(data3, spec, g, corr3.correlation(), {W}).loglik;
  for (int it = 0; it < 200; ++it) {
    mh_update_correlation(corr3, ll3, data3, spec, g, {W}, prior, 0.2, rng);
    Eigen::MatrixXd Rc = corr3.correlation();
    CHECK((Rc.diagonal().array() - 1.0).abs().maxCoeff() < 1e-12);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Rc);
    CHECK(es.eigenvalues().minCoeff() > 0.0);
  }
}

TEST_CASE("imputation fills only the missing cells") {
  ModelSpec spec = build_random_walk_plus_noise(2);
  GarchParams g = GarchParams::zeros(2);
  g.alpha0 = {1.0, 1.0};
  Eigen::MatrixXd R = correlation_from_rho(0.9);

  SeriesData data;
  data.y = Eigen::MatrixXd::Zero(3, 2);
  data.y(1, 0) = 2.0;
  data.observed = BoolMask::Constant(3, 2, true);
  data.observed(1, 1) = false;
  Eigen::MatrixXd states = Eigen::MatrixXd::Zero(4, 2);

  Rng rng(31);
  double sum = 0.0, sumsq = 0.0;
  const int n_rep = 4000;
  for (int rep = 0; rep < n_rep; ++rep) {
    Eigen::MatrixXd imp = impute_missing(states, spec, g, R, data, rng);
    for (Eigen::Index t = 0; t < 3; ++t)
      for (Eigen::Index i = 0; i < 2; ++i)
        CHECK(std::isnan(imp(t, i)) == (t != 1 || i != 1));
    sum += imp(1, 1);
    sumsq += imp(1, 1) * imp(1, 1);
  }
  // conditional law given y(1,0)=2: N(0.9 * 2, 1 - 0.81)
  double mean = sum / n_rep;
  double var = sumsq / n_rep - mean * mean;
  CHECK(mean == doctest::Approx(1.8).epsilon(0.02));
  CHECK(var == doctest::Approx(0.19).epsilon(0.08));
}

TEST_CASE("imputation of a fully missing row uses the state mean") {
  ModelSpec spec = build_random_walk_plus_noise(1);
  GarchParams g = GarchParams::zeros(1);
  Eigen::MatrixXd R = Eigen::MatrixXd::Identity(1, 1);
  SeriesData data;
  data.y = Eigen::MatrixXd::Zero(2, 1);
  data.observed = BoolMask::Constant(2, 1, true);
  data.observed(0, 0) = false;
  Eigen::MatrixXd states(3, 1);
  states << 0.0, 5.0, 5.0;

  Rng rng(2);
  double sum = 0.0;
  for (int rep = 0; rep < 4000; ++rep) sum += impute_missing(states, spec, g, R, data, rng)(0, 0);
  CHECK(sum / 4000.0 == doctest::Approx(5.0).epsilon(0.01));
}

TEST_CASE("derived state correlations") {
  CHECK(derived_state_correlation(Eigen::MatrixXd::Identity(3, 3)).isZero());
  Eigen::MatrixXd W(2, 2);
  W << 4.0, 2.0, 2.0, 4.0;
  CHECK(derived_state_correlation(W)[0] == doctest::Approx(0.5));
  CHECK_THROWS(derived_state_correlation(Eigen::MatrixXd::Identity(1, 1)));
}

TEST_CASE("run_chain bookkeeping") {
  ModelSpec spec;
  GarchParams g;
  Eigen::MatrixXd R, W;
  SeriesData data = make_data(2, 40, spec, g, R, W);

  FitSpec fit;
  fit.spec = spec;
  McmcConfig cfg;
  cfg.n_chains = 2;
  cfg.burn_in = 50;
  cfg.thin = 2;
  cfg.n_keep = 20;  // 10 per chain
  cfg.seed = 4;
  cfg.save_states = true;

  PosteriorDraws out = run_chain(data, fit, PriorSpec{}, cfg, 123, 1);
  CHECK(out.size() == 10);
  CHECK(out.pointwise_lp.rows() == 10);
  CHECK(out.pointwise_lp.cols() == 40);
  CHECK(out.states.size() == 10);
  for (const auto& d : out.draws) {
    CHECK(d.garch.is_valid());
    CHECK(d.R(0, 0) == doctest::Approx(1.0));
    CHECK(std::abs(d.R(0, 1)) < 1.0);
    Eigen::LLT<Eigen::MatrixXd> llt(d.W);
    CHECK(llt.info() == Eigen::Success);
    CHECK(d.chain == 1);
  }
  CHECK(out.pointwise_lp.allFinite());
  CHECK(out.acceptance_rates.count("garch_1") == 1);
  CHECK(out.acceptance_rates.count("correlation") == 1);

  PosteriorDraws rerun = run_chain(data, fit, PriorSpec{}, cfg, 123, 1);
  CHECK(out.pointwise_lp == rerun.pointwise_lp);
  CHECK(out.draws[3].W == rerun.draws[3].W);

  cfg.n_keep = 0;
  PosteriorDraws none = run_chain(data, fit, PriorSpec{}, cfg, 123, 1);
  CHECK(none.size() == 0);
}

TEST_CASE("parallel chains are reproducible and thread-count invariant") {
  ModelSpec spec;
  GarchParams g;
  Eigen::MatrixXd R, W;
  SeriesData data = make_data(2, 30, spec, g, R, W);
  // a couple of gaps to exercise the imputation path
  data.observed(5, 0) = false;
  data.observed(12, 1) = false;

  FitSpec fit;
  fit.spec = spec;
  McmcConfig cfg;
  cfg.n_chains = 3;
  cfg.burn_in = 40;
  cfg.thin = 2;
  cfg.n_keep = 12;  // 4 per chain
  cfg.seed = 99;
  cfg.n_threads = 1;

  PosteriorDraws serial = run_chains_parallel(data, fit, PriorSpec{}, cfg);
  cfg.n_threads = 3;
  PosteriorDraws threaded = run_chains_parallel(data, fit, PriorSpec{}, cfg);

  CHECK(serial.size() == 12);
  CHECK(serial.pointwise_lp == threaded.pointwise_lp);
  for (std::size_t s = 0; s < serial.size(); ++s) {
    CHECK(serial.draws[s].W == threaded.draws[s].W);
    CHECK(serial.draws[s].chain == threaded.draws[s].chain);
  }
  CHECK(serial.draws.front().chain == 1);
  CHECK(serial.draws.back().chain == 3);
  CHECK(serial.imputations.size() == 12);
  CHECK(serial.chain_errors.empty());
}

TEST_CASE("constant-variance benchmark fit") {
  ModelSpec spec;
  GarchParams g;
  Eigen::MatrixXd R, W;
  SeriesData data = make_data(2, 50, spec, g, R, W, 61);

  FitSpec fit;
  fit.spec = spec;
  fit.garch_enabled = false;
  McmcConfig cfg;
  cfg.n_chains = 1;
  cfg.burn_in = 60;
  cfg.thin = 2;
  cfg.n_keep = 15;
  cfg.seed = 8;

  PosteriorDraws out = run_chains_parallel(data, fit, PriorSpec{}, cfg);
  CHECK(out.size() == 15);
  for (const auto& d : out.draws) {
    Eigen::LLT<Eigen::MatrixXd> llt(d.V);
    CHECK(llt.info() == Eigen::Success);
    CHECK(d.R(0, 1) == doctest::Approx(d.V(0, 1) / std::sqrt(d.V(0, 0) * d.V(1, 1))));
  }
  CHECK(out.acceptance_rates.count("correlation") == 0);
}

TEST_CASE("flatten_draws layout") {
  ModelSpec spec;
  GarchParams g;
  Eigen::MatrixXd R, W;
  SeriesData data = make_data(2, 25, spec, g, R, W);

  FitSpec fit;
  fit.spec = spec;
  McmcConfig cfg;
  cfg.n_chains = 1;
  cfg.burn_in = 30;
  cfg.thin = 1;
  cfg.n_keep = 5;
  cfg.seed = 3;

  PosteriorDraws out = run_chains_parallel(data, fit, PriorSpec{}, cfg);
  auto [names, flat] = flatten_draws(out, fit);
  CHECK(flat.rows() == 5);
  CHECK(flat.cols() == static_cast<Eigen::Index>(names.size()));
  // 2 series x (alpha0, alpha1, beta1) + rho + W upper triangle + rho_s
  CHECK(names.size() == 6 + 1 + 3 + 1);
  CHECK(names[0] == "alpha0_1");
  CHECK(names[6] == "rho");
  CHECK(names.back() == "rho_s_1_2");
  for (Eigen::Index s = 0; s < 5; ++s) {
    CHECK(flat(s, 0) == out.draws[s].garch.alpha0[0]);
    CHECK(flat(s, 6) == out.draws[s].R(0, 1));
  }
}
