#include <doctest.h>

#include <cmath>

#include "garchssm/diagnostics.hpp"

using namespace garchssm;

TEST_CASE("waic with identical draws has exactly zero penalty") {
  Eigen::MatrixXd lp(4, 3);
  for (Eigen::Index s = 0; s < 4; ++s) lp.row(s) << -1.3, -0.7, -2.1;
  WaicReport rep = waic(lp);
  CHECK(rep.p_waic == 0.0);
  CHECK(rep.lppd == doctest::Approx(-4.1).epsilon(1e-15));
  CHECK(rep.waic == rep.lppd);
  CHECK(rep.per_point.sum() == rep.waic);
}

TEST_CASE("waic identities") {
  Rng rng(77);
  std::normal_distribution<double> nd(-1.0, 0.5);
  Eigen::MatrixXd lp(50, 20);
  for (Eigen::Index s = 0; s < 50; ++s)
    for (Eigen::Index t = 0; t < 20; ++t) lp(s, t) = nd(rng);
  WaicReport rep = waic(lp);
  CHECK(rep.waic == doctest::Approx(rep.lppd - rep.p_waic).epsilon(1e-12));
  CHECK(rep.per_point.sum() == doctest::Approx(rep.waic).epsilon(1e-10));
  CHECK(rep.p_waic > 0.0);

  // Jensen: lppd is at least the mean log density
  double mean_log = lp.colwise().mean().sum();
  CHECK(rep.lppd >= mean_log);

  // a constant shift moves lppd by c*T and leaves the penalty alone
  const double c = 1000.0;
  WaicReport shifted = waic(lp.array() + c);
  CHECK(shifted.lppd == doctest::Approx(rep.lppd + c * 20).epsilon(1e-9));
  CHECK(shifted.p_waic == doctest::Approx(rep.p_waic).epsilon(1e-6));

  CHECK_THROWS(waic(Eigen::MatrixXd::Zero(1, 5)));
  Eigen::MatrixXd bad = lp;
  bad(3, 3) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS(waic(bad));
}

TEST_CASE("waic matches the conjugate closed form") {
  // y_i ~ N(mu, 1), mu ~ N(0, 1); both expectation terms are available in
  // closed form under the posterior N(mu_n, s_n^2)
  const std::vector<double> y{0.5, -0.3, 1.2};
  const double s_n2 = 1.0 / 4.0;
  const double mu_n = (y[0] + y[1] + y[2]) / 4.0;

  double lppd_exact = 0.0, elog_exact = 0.0;
  for (double yi : y) {
    lppd_exact += log_normal_pdf(yi, mu_n, std::sqrt(1.0 + s_n2));
    elog_exact += -0.5 * std::log(2.0 * M_PI) - ((yi - mu_n) * (yi - mu_n) + s_n2) / 2.0;
  }
  double p_waic_exact = 2.0 * (lppd_exact - elog_exact);

  Rng rng(5);
  std::normal_distribution<double> post(mu_n, std::sqrt(s_n2));
  const Eigen::Index S = 200000;
  Eigen::MatrixXd lp(S, 3);
  for (Eigen::Index s = 0; s < S; ++s) {
    double mu = post(rng);
    for (int i = 0; i < 3; ++i) lp(s, i) = log_normal_pdf(y[i], mu, 1.0);
  }
  WaicReport rep = waic(lp);
  CHECK(rep.lppd == doctest::Approx(lppd_exact).epsilon(0.005));
  CHECK(rep.p_waic == doctest::Approx(p_waic_exact).epsilon(0.05));
}

TEST_CASE("model comparison ranking") {
  WaicReport a, b;
  a.waic = -23958.42;
  b.waic = -24676.52;
  a.per_point = Eigen::VectorXd::Zero(10);
  b.per_point = Eigen::VectorXd::Zero(10);

  auto ranked = compare_models({{"dynamic", a}, {"static", b}});
  CHECK(ranked[0].name == "dynamic");
  CHECK(ranked[0].diff_to_best == 0.0);
  CHECK(ranked[1].diff_to_best == doctest::Approx(718.10));

  // exact ties fall back to name order
  WaicReport c = a;
  auto tied = compare_models({{"zeta", a}, {"alpha", c}});
  CHECK(tied[0].name == "alpha");
  CHECK(tied[1].diff_to_best == 0.0);

  WaicReport short_rep = a;
  short_rep.per_point = Eigen::VectorXd::Zero(5);
  CHECK_THROWS(compare_models({{"a", a}, {"b", short_rep}}));
  CHECK_THROWS(compare_models({{"only", a}}));
}

TEST_CASE("ergodic means") {
  Eigen::VectorXd draws(3);
  draws << 1.0, 2.0, 3.0;
  Eigen::VectorXd trace = ergodic_means(draws);
  CHECK(trace[0] == 1.0);
  CHECK(trace[1] == 1.5);
  CHECK(trace[2] == 2.0);
  CHECK_THROWS(ergodic_means(Eigen::VectorXd()));
}

TEST_CASE("summaries") {
  Eigen::MatrixXd flat(4, 1);
  flat << 1.0, 2.0, 3.0, 4.0;
  auto rows = summarize({"x"}, flat);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].mean == 2.5);
  CHECK(rows[0].median == 2.5);
  CHECK(rows[0].sd == doctest::Approx(std::sqrt(5.0 / 3.0)));
  CHECK(rows[0].ci_lo == doctest::Approx(1.075));
  CHECK(rows[0].ci_hi == doctest::Approx(3.925));

  // order of draws is irrelevant
  Eigen::MatrixXd shuffled(4, 1);
  shuffled << 3.0, 1.0, 4.0, 2.0;
  auto rows2 = summarize({"x"}, shuffled);
  CHECK(rows2[0].median == rows[0].median);
  CHECK(rows2[0].ci_lo == rows[0].ci_lo);

  Eigen::MatrixXd single(1, 1);
  single << 7.0;
  auto one = summarize({"x"}, single);
  CHECK(one[0].mean == 7.0);
  CHECK(one[0].median == 7.0);
  CHECK(one[0].sd == 0.0);

  CHECK_THROWS(summarize({"a", "b"}, single));
  CHECK_THROWS(summarize({"x"}, Eigen::MatrixXd(0, 1)));
}

namespace {
SeriesData resid_data(Eigen::Index T, double noise_scale, SimulationTruth& truth,
                      ModelSpec& spec, GarchParams& g, Eigen::MatrixXd& R, Eigen::MatrixXd& W,
                      std::uint64_t seed = 3) {
  spec = build_random_walk_plus_noise(1);
  spec.C0 = Eigen::MatrixXd::Identity(1, 1);
  g = GarchParams::zeros(1);
  g.alpha0[0] = noise_scale;
  R = Eigen::MatrixXd::Identity(1, 1);
  W = 0.2 * Eigen::MatrixXd::Identity(1, 1);
  auto [data, tr] = simulate(spec, g, R, {W}, T, seed);
  truth = tr;
  return data;
}
}  // namespace

TEST_CASE("residuals vanish when observation noise does") {
  SimulationTruth truth;
  ModelSpec spec;
  GarchParams g;
  Eigen::MatrixXd R, W;
  SeriesData data = resid_data(50, 1e-12, truth, spec, g, R, W);
  ResidualReport rep = residual_analysis(data, spec, g, R, {W}, truth.states);
  CHECK(rep.raw.cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("standardized residuals at the truth pass the normality test") {
  SimulationTruth truth;
  ModelSpec spec;
  GarchParams g;
  Eigen::MatrixXd R, W;
  SeriesData data = resid_data(1000, 1.0, truth, spec, g, R, W, 17);
  ResidualReport rep = residual_analysis(data, spec, g, R, {W}, truth.states);
  CHECK(rep.ks[0].p_value > 0.05);
  // qq pairs track the diagonal away from the extremes
  const auto& qq = rep.qq[0];
  for (std::size_t k = 50; k + 50 < qq.size(); ++k)
    CHECK(std::abs(qq[k].first - qq[k].second) < 0.35);
}

TEST_CASE("heavy-tailed errors fail the normality test") {
  SimulationTruth truth;
  ModelSpec spec;
  GarchParams g;
  Eigen::MatrixXd R, W;
  SeriesData data = resid_data(1500, 1.0, truth, spec, g, R, W, 23);
  // replace the errors with t(2) noise around the same states
  Rng rng(29);
  std::student_t_distribution<double> t2(2.0);
  for (Eigen::Index t = 0; t < data.T(); ++t)
    data.y(t, 0) = truth.states(t + 1, 0) + t2(rng);
  ResidualReport rep = residual_analysis(data, spec, g, R, {W}, truth.states);
  CHECK(rep.ks[0].p_value < 0.01);
}

TEST_CASE("residual report marks missing cells") {
  SimulationTruth truth;
  ModelSpec spec;
  GarchParams g;
  Eigen::MatrixXd R, W;
  SeriesData data = resid_data(40, 1.0, truth, spec, g, R, W);
  data.observed(9, 0) = false;
  ResidualReport rep = residual_analysis(data, spec, g, R, {W}, truth.states);
  CHECK(std::isnan(rep.raw(9, 0)));
  CHECK(std::isnan(rep.standardized(9, 0)));
  CHECK_FALSE(std::isnan(rep.raw(10, 0)));
  CHECK(rep.qq[0].size() == 39);

  CHECK_THROWS(residual_analysis(data, spec, g, R, {W}, truth.states.topRows(10)));
}

TEST_CASE("dynamic variance path is flat for constant-variance draws") {
  ModelSpec spec = build_random_walk_plus_noise(1);
  GarchParams g = GarchParams::zeros(1);
  g.alpha0[0] = 4.0;
  Eigen::MatrixXd R = Eigen::MatrixXd::Identity(1, 1);
  Eigen::MatrixXd W = 0.1 * Eigen::MatrixXd::Identity(1, 1);
  SeriesData data = simulate(spec, g, R, {W}, 25, 9).first;

  FitSpec fit;
  fit.spec = spec;
  PosteriorDraws draws;
  for (int s = 0; s < 3; ++s) {
    ParamDraw d;
    d.garch = g;
    d.R = R;
    d.W = W;
    draws.draws.push_back(d);
  }
  VariancePath path = dynamic_variance_path(draws, data, fit);
  REQUIRE(path.per_series.size() == 1);
  for (Eigen::Index t = 0; t < 25; ++t) {
    CHECK(path.per_series[0](t, 0) == doctest::Approx(2.0));
    CHECK(path.per_series[0](t, 1) == doctest::Approx(2.0));
    CHECK(path.per_series[0](t, 2) == doctest::Approx(2.0));
  }

  PosteriorDraws empty;
  CHECK_THROWS(dynamic_variance_path(empty, data, fit));
}
