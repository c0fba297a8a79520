#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "garchssm/filter.hpp"
#include "garchssm/model.hpp"

namespace garchssm {

struct PriorSpec {
  double cauchy_scale_alpha0 = 1.0;
  double cauchy_scale_ab = 1.0;       // joint half-Cauchy for (alpha, beta), truncated
  double cauchy_scale_udiag = 1.0;
  double normal_sd_uoffdiag = 1.0;
  double iw_df = 10.0;
  double iw_scale = 10.0;             // scale matrix is iw_scale * I
  bool rho_uniform = true;            // bivariate case: rho ~ Uniform(-1,1)
};

struct McmcConfig {
  int n_chains = 4;
  int burn_in = 20000;
  int thin = 50;
  int n_keep = 8000;                  // total retained draws across chains
  double proposal_sd_garch = 0.05;
  double proposal_sd_corr = 0.05;
  bool adapt = true;
  std::uint64_t seed = 0;
  int n_threads = 1;
  bool save_states = false;
  bool impute = true;
};

/// What to fit: the model skeleton plus whether observation errors carry the
/// GARCH recursion (false = standard constant-V benchmark with IW prior on V).
struct FitSpec {
  ModelSpec spec;
  bool garch_enabled = true;
  int p = 1;
  int q = 1;
};

struct ParamDraw {
  GarchParams garch;     // GARCH fit only
  Eigen::MatrixXd R;     // observation-error correlation
  Eigen::MatrixXd W;     // state innovation covariance
  Eigen::MatrixXd V;     // standard fit only: constant observation covariance
  int chain = 0;
};

struct PosteriorDraws {
  std::vector<ParamDraw> draws;
  Eigen::MatrixXd pointwise_lp;                 // draws x T
  std::vector<Eigen::MatrixXd> states;          // optional, (T+1) x r per draw
  std::vector<Eigen::MatrixXd> imputations;     // per draw, T x n with NaN at observed cells
  std::map<std::string, double> acceptance_rates;
  std::vector<std::string> chain_errors;        // one entry per failed chain

  std::size_t size() const { return draws.size(); }
};

/// Flattened scalar view of the draws, for summaries and serialization.
/// Includes the sampled parameters plus derived state correlations rho_s.
std::pair<std::vector<std::string>, Eigen::MatrixXd> flatten_draws(const PosteriorDraws& draws,
                                                                   const FitSpec& fit);

Eigen::MatrixXd ffbs(const FilterOutput& filter, const ModelSpec& spec, const StateCov& W,
                     Rng& rng);

Eigen::MatrixXd sample_W_conjugate(const Eigen::MatrixXd& states, const ModelSpec& spec,
                                   const PriorSpec& prior, Rng& rng);

/// Random-walk MH step for series i's GARCH block against the
/// state-marginalized posterior, proposing in (log alpha0, alpha, beta)
/// coordinates with step L*z. Updates params/loglik in place on accept.
bool mh_update_garch(Eigen::Index series, GarchParams& params, double& loglik,
                     const SeriesData& data, const ModelSpec& spec, const Eigen::MatrixXd& R,
                     const StateCov& W, const PriorSpec& prior,
                     const Eigen::MatrixXd& proposal_chol, Rng& rng);

/// Isotropic-proposal convenience overload (step sd in every coordinate).
bool mh_update_garch(Eigen::Index series, GarchParams& params, double& loglik,
                     const SeriesData& data, const ModelSpec& spec, const Eigen::MatrixXd& R,
                     const StateCov& W, const PriorSpec& prior, double proposal_sd, Rng& rng);

/// Correlation block state: unnormalized factor entries for n >= 3, scalar rho
/// for the bivariate case.
struct CorrelationState {
  Eigen::MatrixXd U_raw;   // n x n upper-triangular, unnormalized; unused when n == 2
  double rho = 0.0;        // bivariate case
  Eigen::Index n = 0;

  static CorrelationState identity(Eigen::Index n);
  Eigen::MatrixXd correlation() const;
  double log_prior(const PriorSpec& prior) const;
};

bool mh_update_correlation(CorrelationState& corr, double& loglik, const SeriesData& data,
                           const ModelSpec& spec, const GarchParams& garch, const StateCov& W,
                           const PriorSpec& prior, double proposal_sd, Rng& rng);

/// Conditional Gaussian draw of the missing components given the state path
/// and observed components. Returns T x n with NaN at observed cells.
Eigen::MatrixXd impute_missing(const Eigen::MatrixXd& states, const ModelSpec& spec,
                               const GarchParams& garch, const Eigen::MatrixXd& R,
                               const SeriesData& data, Rng& rng);

Eigen::VectorXd derived_state_correlation(const Eigen::MatrixXd& W);

PosteriorDraws run_chain(const SeriesData& data, const FitSpec& fit, const PriorSpec& prior,
                         const McmcConfig& config, std::uint64_t chain_seed, int chain_id = 0);

PosteriorDraws run_chains_parallel(const SeriesData& data, const FitSpec& fit,
                                   const PriorSpec& prior, const McmcConfig& config);

}  // namespace garchssm
