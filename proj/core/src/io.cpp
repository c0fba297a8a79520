#include "garchssm/io.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace garchssm {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt4(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, sep)) out.push_back(field);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& s, int line_no) {
  char* end = nullptr;
  std::string t = trim(s);
  double v = std::strtod(t.c_str(), &end);
  if (t.empty() || end != t.c_str() + t.size())
    throw std::runtime_error("non-numeric cell '" + s + "' at line " + std::to_string(line_no));
  return v;
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  for (const auto& tok : split(s, ','))
    out.push_back(parse_double(tok, 0));
  return out;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file: " + path.string());
  out << content;
}

bool is_missing_token(const std::string& s) {
  std::string t = trim(s);
  return t.empty() || t == "NA" || t == "na" || t == "NaN" || t == "nan";
}

bool is_time_name(const std::string& s) {
  std::string t = trim(s);
  for (auto& c : t) c = static_cast<char>(std::tolower(c));
  return t == "time" || t == "t";
}

}  // namespace

CsvData read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path.string());
  std::string line;
  int line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    header = split(line, ',');
    break;
  }
  if (header.empty()) throw std::runtime_error("empty file: " + path.string());

  CsvData out;
  std::size_t first_col = 0;
  if (is_time_name(header[0]) && header.size() > 1) {
    out.has_time = true;
    first_col = 1;
  }
  for (std::size_t c = first_col; c < header.size(); ++c) out.names.push_back(trim(header[c]));
  const std::size_t n = out.names.size();
  if (n == 0) throw std::runtime_error("no series columns in header of " + path.string());

  std::vector<std::vector<double>> rows;
  std::vector<std::vector<bool>> mask;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty() || trim(line)[0] == '#') continue;
    auto cells = split(line, ',');
    if (cells.size() != header.size())
      throw std::runtime_error("ragged row at line " + std::to_string(line_no) + ": expected " +
                               std::to_string(header.size()) + " cells, got " +
                               std::to_string(cells.size()));
    if (out.has_time) out.time.push_back(trim(cells[0]));
    std::vector<double> row(n, 0.0);
    std::vector<bool> obs(n, true);
    for (std::size_t c = 0; c < n; ++c) {
      const std::string& cell = cells[first_col + c];
      if (is_missing_token(cell)) {
        obs[c] = false;
        row[c] = std::numeric_limits<double>::quiet_NaN();
      } else {
        row[c] = parse_double(cell, line_no);
      }
    }
    rows.push_back(std::move(row));
    mask.push_back(std::move(obs));
  }
  if (rows.empty()) throw std::runtime_error("no data rows in " + path.string());

  const auto T = static_cast<Eigen::Index>(rows.size());
  out.series.y.resize(T, static_cast<Eigen::Index>(n));
  out.series.observed = BoolMask::Constant(T, static_cast<Eigen::Index>(n), true);
  for (Eigen::Index t = 0; t < T; ++t)
    for (std::size_t c = 0; c < n; ++c) {
      out.series.y(t, static_cast<Eigen::Index>(c)) = rows[t][c];
      out.series.observed(t, static_cast<Eigen::Index>(c)) = mask[t][c];
    }
  return out;
}

void write_csv(const fs::path& path, const CsvData& data,
               const std::vector<std::string>& header_comments) {
  std::ostringstream os;
  for (const auto& c : header_comments) os << "# " << c << "\n";
  if (data.has_time) os << "time,";
  for (std::size_t i = 0; i < data.names.size(); ++i)
    os << data.names[i] << (i + 1 < data.names.size() ? "," : "");
  os << "\n";
  for (Eigen::Index t = 0; t < data.series.T(); ++t) {
    if (data.has_time) os << data.time[t] << ",";
    for (Eigen::Index i = 0; i < data.series.n(); ++i) {
      if (data.series.observed(t, i))
        os << fmt17(data.series.y(t, i));
      else
        os << "NA";
      if (i + 1 < data.series.n()) os << ",";
    }
    os << "\n";
  }
  write_file(path, os.str());
}

ModelSpec RunConfig::build_spec() const {
  ModelSpec spec =
      (model_kind == "trend") ? build_local_linear_trend(dim) : build_random_walk_plus_noise(dim);
  if (init_m0.size() > 0) {
    if (init_m0.size() != spec.r())
      throw std::runtime_error("config key init.m0: expected " + std::to_string(spec.r()) +
                               " values");
    spec.m0 = init_m0;
  }
  spec.C0 = init_c0_diag * Eigen::MatrixXd::Identity(spec.r(), spec.r());
  return spec;
}

FitSpec RunConfig::build_fit() const {
  FitSpec fit;
  fit.spec = build_spec();
  fit.garch_enabled = garch_enabled;
  fit.p = p;
  fit.q = q;
  return fit;
}

RunConfig parse_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path.string());
  RunConfig cfg;
  std::map<std::string, std::string> kv;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config line " + std::to_string(line_no) + ": expected key=value");
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }

  auto take = [&](const std::string& key) -> std::optional<std::string> {
    auto it = kv.find(key);
    if (it == kv.end()) return std::nullopt;
    std::string v = it->second;
    kv.erase(it);
    return v;
  };
  auto as_int = [&](const std::string& key, const std::string& v) {
    try {
      return std::stoi(v);
    } catch (...) {
      throw std::runtime_error("config key " + key + ": not an integer: '" + v + "'");
    }
  };
  auto as_double = [&](const std::string& key, const std::string& v) {
    try {
      return std::stod(v);
    } catch (...) {
      throw std::runtime_error("config key " + key + ": not a number: '" + v + "'");
    }
  };
  auto as_bool = [&](const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw std::runtime_error("config key " + key + ": not a boolean: '" + v + "'");
  };
  auto as_list = [&](const std::string& key, const std::string& v) {
    try {
      return parse_list(v);
    } catch (...) {
      throw std::runtime_error("config key " + key + ": not a numeric list: '" + v + "'");
    }
  };

  if (auto v = take("model.kind")) {
    if (*v != "rwpn" && *v != "trend")
      throw std::runtime_error("config key model.kind: must be rwpn or trend, got '" + *v + "'");
    cfg.model_kind = *v;
  }
  if (auto v = take("model.dim")) cfg.dim = as_int("model.dim", *v);
  if (auto v = take("garch.enabled")) cfg.garch_enabled = as_bool("garch.enabled", *v);
  if (auto v = take("garch.p")) cfg.p = as_int("garch.p", *v);
  if (auto v = take("garch.q")) cfg.q = as_int("garch.q", *v);

  if (auto v = take("priors.cauchy_scale_alpha0"))
    cfg.priors.cauchy_scale_alpha0 = as_double("priors.cauchy_scale_alpha0", *v);
  if (auto v = take("priors.cauchy_scale_ab"))
    cfg.priors.cauchy_scale_ab = as_double("priors.cauchy_scale_ab", *v);
  if (auto v = take("priors.cauchy_scale_udiag"))
    cfg.priors.cauchy_scale_udiag = as_double("priors.cauchy_scale_udiag", *v);
  if (auto v = take("priors.normal_sd_uoffdiag"))
    cfg.priors.normal_sd_uoffdiag = as_double("priors.normal_sd_uoffdiag", *v);
  if (auto v = take("priors.iw_df")) cfg.priors.iw_df = as_double("priors.iw_df", *v);
  if (auto v = take("priors.iw_scale")) cfg.priors.iw_scale = as_double("priors.iw_scale", *v);

  if (auto v = take("mcmc.chains")) cfg.mcmc.n_chains = as_int("mcmc.chains", *v);
  if (auto v = take("mcmc.burn_in")) cfg.mcmc.burn_in = as_int("mcmc.burn_in", *v);
  if (auto v = take("mcmc.thin")) cfg.mcmc.thin = as_int("mcmc.thin", *v);
  if (auto v = take("mcmc.keep")) cfg.mcmc.n_keep = as_int("mcmc.keep", *v);
  if (auto v = take("mcmc.adapt")) cfg.mcmc.adapt = as_bool("mcmc.adapt", *v);
  if (auto v = take("mcmc.threads")) cfg.mcmc.n_threads = as_int("mcmc.threads", *v);
  if (auto v = take("mcmc.save_states")) cfg.mcmc.save_states = as_bool("mcmc.save_states", *v);
  if (auto v = take("mcmc.impute")) cfg.mcmc.impute = as_bool("mcmc.impute", *v);
  if (auto v = take("mcmc.proposal_sd_garch"))
    cfg.mcmc.proposal_sd_garch = as_double("mcmc.proposal_sd_garch", *v);
  if (auto v = take("mcmc.proposal_sd_corr"))
    cfg.mcmc.proposal_sd_corr = as_double("mcmc.proposal_sd_corr", *v);

  if (auto v = take("io.input")) cfg.input = *v;
  if (auto v = take("io.output_dir")) cfg.output_dir = *v;
  if (auto v = take("seed")) cfg.seed = static_cast<std::uint64_t>(std::stoull(*v));
  if (auto v = take("init.m0")) {
    auto vals = as_list("init.m0", *v);
    cfg.init_m0 = Eigen::Map<Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
  }
  if (auto v = take("init.c0_diag")) cfg.init_c0_diag = as_double("init.c0_diag", *v);

  if (auto v = take("sim.T")) cfg.sim_T = as_int("sim.T", *v);
  if (auto v = take("sim.alpha0")) cfg.sim_alpha0 = as_list("sim.alpha0", *v);
  if (auto v = take("sim.alpha1")) cfg.sim_alpha1 = as_list("sim.alpha1", *v);
  if (auto v = take("sim.beta1")) cfg.sim_beta1 = as_list("sim.beta1", *v);
  if (auto v = take("sim.w_diag")) cfg.sim_w_diag = as_list("sim.w_diag", *v);
  if (auto v = take("sim.rho")) cfg.sim_rho = as_double("sim.rho", *v);
  if (auto v = take("sim.R")) cfg.sim_R = as_list("sim.R", *v);

  if (!kv.empty())
    throw std::runtime_error("unknown config key: " + kv.begin()->first);

  if (cfg.output_dir.empty()) {
    if (const char* env = std::getenv("GARCHSSM_OUT")) cfg.output_dir = env;
  }
  cfg.mcmc.seed = cfg.seed;
  return cfg;
}

namespace {

Eigen::MatrixXd sim_correlation(const RunConfig& cfg) {
  const Eigen::Index n = cfg.dim;
  if (!cfg.sim_R.empty()) {
    if (static_cast<Eigen::Index>(cfg.sim_R.size()) != n * n)
      throw std::runtime_error("config key sim.R: expected " + std::to_string(n * n) + " values");
    Eigen::MatrixXd R(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) R(i, j) = cfg.sim_R[i * n + j];
    return R;
  }
  if (n == 2 && cfg.sim_rho != 0.0) return correlation_from_rho(cfg.sim_rho);
  return Eigen::MatrixXd::Identity(n, n);
}

GarchParams sim_garch(const RunConfig& cfg) {
  const Eigen::Index n = cfg.dim;
  auto broadcast = [&](const std::vector<double>& v, double fallback) {
    std::vector<double> out(n, fallback);
    if (v.size() == 1)
      out.assign(n, v[0]);
    else if (!v.empty()) {
      if (static_cast<Eigen::Index>(v.size()) != n)
        throw std::runtime_error("sim parameter list length must be 1 or model.dim");
      out = v;
    }
    return out;
  };
  GarchParams g;
  g.alpha0 = broadcast(cfg.sim_alpha0, 1.0);
  auto a1 = broadcast(cfg.sim_alpha1, 0.0);
  auto b1 = broadcast(cfg.sim_beta1, 0.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    g.alpha.push_back({a1[i]});
    g.beta.push_back({b1[i]});
  }
  return g;
}

void write_matrix_csv(const fs::path& path, const Eigen::MatrixXd& M,
                      const std::vector<std::string>& cols,
                      const std::vector<std::string>& header_comments = {}) {
  std::ostringstream os;
  for (const auto& c : header_comments) os << "# " << c << "\n";
  for (std::size_t i = 0; i < cols.size(); ++i) os << cols[i] << (i + 1 < cols.size() ? "," : "");
  os << "\n";
  for (Eigen::Index t = 0; t < M.rows(); ++t) {
    for (Eigen::Index j = 0; j < M.cols(); ++j) {
      if (std::isnan(M(t, j)))
        os << "NA";
      else
        os << fmt17(M(t, j));
      if (j + 1 < M.cols()) os << ",";
    }
    os << "\n";
  }
  write_file(path, os.str());
}

json config_to_json(const RunConfig& cfg) {
  json j;
  j["model.kind"] = cfg.model_kind;
  j["model.dim"] = cfg.dim;
  j["garch.enabled"] = cfg.garch_enabled;
  j["garch.p"] = cfg.p;
  j["garch.q"] = cfg.q;
  j["mcmc.chains"] = cfg.mcmc.n_chains;
  j["mcmc.burn_in"] = cfg.mcmc.burn_in;
  j["mcmc.thin"] = cfg.mcmc.thin;
  j["mcmc.keep"] = cfg.mcmc.n_keep;
  j["init.c0_diag"] = cfg.init_c0_diag;
  j["seed"] = cfg.seed;
  return j;
}

}  // namespace

int cmd_simulate(const RunConfig& cfg) {
  if (cfg.sim_T < 1) throw std::runtime_error("config key sim.T: must be >= 1");
  ModelSpec spec = cfg.build_spec();
  GarchParams garch = sim_garch(cfg);
  Eigen::MatrixXd R = sim_correlation(cfg);
  Eigen::MatrixXd Wm;
  if (cfg.sim_w_diag.empty()) {
    Wm = 0.1 * Eigen::MatrixXd::Identity(spec.r(), spec.r());
  } else if (cfg.sim_w_diag.size() == 1) {
    Wm = cfg.sim_w_diag[0] * Eigen::MatrixXd::Identity(spec.r(), spec.r());
  } else {
    if (static_cast<Eigen::Index>(cfg.sim_w_diag.size()) != spec.r())
      throw std::runtime_error("config key sim.w_diag: expected " + std::to_string(spec.r()) +
                               " values");
    Wm = Eigen::MatrixXd::Zero(spec.r(), spec.r());
    for (Eigen::Index i = 0; i < spec.r(); ++i) Wm(i, i) = cfg.sim_w_diag[i];
  }

  auto [data, truth] = simulate(spec, garch, R, {Wm}, cfg.sim_T, cfg.seed);

  fs::create_directories(cfg.output_dir);
  std::vector<std::string> comments = {"seed=" + std::to_string(cfg.seed)};

  CsvData out;
  out.series = data;
  for (Eigen::Index i = 0; i < spec.n(); ++i) out.names.push_back("y" + std::to_string(i + 1));
  write_csv(cfg.output_dir / "data.csv", out, comments);

  std::vector<std::string> state_cols, sigma_cols;
  for (Eigen::Index j = 0; j < spec.r(); ++j) state_cols.push_back("theta" + std::to_string(j + 1));
  for (Eigen::Index i = 0; i < spec.n(); ++i) sigma_cols.push_back("sigma" + std::to_string(i + 1));
  write_matrix_csv(cfg.output_dir / "truth_states.csv", truth.states, state_cols, comments);
  write_matrix_csv(cfg.output_dir / "truth_sigma.csv", truth.sigma, sigma_cols, comments);
  return 0;
}

int cmd_fit(const RunConfig& cfg) {
  CsvData csv = read_csv(cfg.input);
  RunConfig cfg_local = cfg;
  if (cfg_local.dim != csv.series.n()) {
    if (cfg_local.dim != 0 && cfg_local.dim != 1)
      throw std::runtime_error("config key model.dim: data has " +
                               std::to_string(csv.series.n()) + " series");
    cfg_local.dim = static_cast<int>(csv.series.n());
  }
  FitSpec fit = cfg_local.build_fit();
  McmcConfig mcmc = cfg_local.mcmc;
  mcmc.save_states = true;

  PosteriorDraws draws = run_chains_parallel(csv.series, fit, cfg_local.priors, mcmc);
  if (draws.size() == 0) throw std::runtime_error("fit produced no draws");

  // every stored draw must satisfy the parameter constraints
  int violations = 0;
  for (const auto& d : draws.draws) {
    if (fit.garch_enabled && !d.garch.is_valid()) ++violations;
    Eigen::LLT<Eigen::MatrixXd> lltW(d.W);
    if (lltW.info() != Eigen::Success) ++violations;
  }

  fs::create_directories(cfg_local.output_dir);

  auto [names, flat] = flatten_draws(draws, fit);
  {
    std::ostringstream os;
    os << "chain,draw";
    for (const auto& nm : names) os << "," << nm;
    os << "\n";
    for (Eigen::Index s = 0; s < flat.rows(); ++s) {
      os << draws.draws[s].chain << "," << s;
      for (Eigen::Index j = 0; j < flat.cols(); ++j) os << "," << fmt17(flat(s, j));
      os << "\n";
    }
    write_file(cfg_local.output_dir / "draws.csv", os.str());
  }

  {
    auto rows = summarize(names, flat);
    std::ostringstream os;
    os << "parameter,mean,median,sd,ci_lo,ci_hi\n";
    for (const auto& row : rows)
      os << row.name << "," << fmt4(row.mean) << "," << fmt4(row.median) << "," << fmt4(row.sd)
         << "," << fmt4(row.ci_lo) << "," << fmt4(row.ci_hi) << "\n";
    write_file(cfg_local.output_dir / "summary.csv", os.str());
  }

  WaicReport wrep = waic(draws.pointwise_lp);
  {
    std::ostringstream os;
    os << "lppd," << fmt17(wrep.lppd) << "\n";
    os << "p_waic," << fmt17(wrep.p_waic) << "\n";
    os << "waic," << fmt17(wrep.waic) << "\n";
    os << "T," << draws.pointwise_lp.cols() << "\n";
    write_file(cfg_local.output_dir / "waic.csv", os.str());
  }

  // paths file: posterior state means/bands, dynamic sd bands, one-step
  // forecast moments; row t=0 carries the initial state only
  {
    const Eigen::Index T = csv.series.T();
    const Eigen::Index n = csv.series.n();
    const Eigen::Index r = fit.spec.r();
    const auto S = static_cast<Eigen::Index>(draws.size());

    VariancePath vpath = dynamic_variance_path(draws, csv.series, fit);

    // forecast moments averaged over draws
    Eigen::MatrixXd fmean = Eigen::MatrixXd::Zero(T, n), fvar = Eigen::MatrixXd::Zero(T, n);
    for (Eigen::Index s = 0; s < S; ++s) {
      const ParamDraw& d = draws.draws[s];
      FilterOutput filt = kalman_filter(csv.series, fit.spec, d.garch, d.R, {d.W});
      for (Eigen::Index t = 0; t < T; ++t) {
        fmean.row(t) += filt.steps[t].f.transpose();
        fvar.row(t) += filt.steps[t].Q.diagonal().transpose();
      }
    }
    fmean /= static_cast<double>(S);
    fvar /= static_cast<double>(S);

    const double nan = std::numeric_limits<double>::quiet_NaN();
    const Eigen::Index ncols = 1 + 3 * r + 3 * n + 2 * n;
    Eigen::MatrixXd paths = Eigen::MatrixXd::Constant(T + 1, ncols, nan);
    std::vector<std::string> cols = {"t"};
    for (Eigen::Index j = 0; j < r; ++j) {
      auto sj = std::to_string(j + 1);
      cols.push_back("state_mean_" + sj);
      cols.push_back("state_lo_" + sj);
      cols.push_back("state_hi_" + sj);
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      auto si = std::to_string(i + 1);
      cols.push_back("sigma_mean_" + si);
      cols.push_back("sigma_lo_" + si);
      cols.push_back("sigma_hi_" + si);
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      auto si = std::to_string(i + 1);
      cols.push_back("forecast_mean_" + si);
      cols.push_back("forecast_sd_" + si);
    }

    for (Eigen::Index t = 0; t <= T; ++t) {
      paths(t, 0) = static_cast<double>(t);
      for (Eigen::Index j = 0; j < r; ++j) {
        std::vector<double> sd(S);
        for (Eigen::Index s = 0; s < S; ++s) sd[s] = draws.states[s](t, j);
        double mean = 0.0;
        for (double v : sd) mean += v;
        mean /= static_cast<double>(S);
        paths(t, 1 + 3 * j) = mean;
        paths(t, 2 + 3 * j) = quantile(sd, 0.025);
        paths(t, 3 + 3 * j) = quantile(sd, 0.975);
      }
      if (t == 0) continue;
      for (Eigen::Index i = 0; i < n; ++i) {
        paths(t, 1 + 3 * r + 3 * i) = vpath.per_series[i](t - 1, 0);
        paths(t, 2 + 3 * r + 3 * i) = vpath.per_series[i](t - 1, 1);
        paths(t, 3 + 3 * r + 3 * i) = vpath.per_series[i](t - 1, 2);
      }
      for (Eigen::Index i = 0; i < n; ++i) {
        paths(t, 1 + 3 * r + 3 * n + 2 * i) = fmean(t - 1, i);
        paths(t, 2 + 3 * r + 3 * n + 2 * i) = std::sqrt(fvar(t - 1, i));
      }
    }
    write_matrix_csv(cfg_local.output_dir / "paths.csv", paths, cols);
  }

  {
    json manifest;
    manifest["version"] = "0.1.0";
    manifest["seed"] = cfg_local.seed;
    manifest["data_hash"] = fnv1a_hex(read_file(cfg_local.input));
    manifest["config"] = config_to_json(cfg_local);
    manifest["config_hash"] = fnv1a_hex(manifest["config"].dump());
    manifest["n_draws"] = draws.size();
    manifest["waic"] = wrep.waic;
    manifest["partial"] = !draws.chain_errors.empty();
    manifest["chain_errors"] = draws.chain_errors;
    manifest["constraint_violations"] = violations;
    json acc;
    for (const auto& [k, v] : draws.acceptance_rates) acc[k] = v;
    manifest["acceptance_rates"] = acc;
    write_file(cfg_local.output_dir / "manifest.json", manifest.dump(2) + "\n");
  }

  for (const auto& err : draws.chain_errors) std::cerr << "warning: " << err << "\n";
  if (violations > 0) std::cerr << "warning: " << violations << " draws violated constraints\n";
  return (!draws.chain_errors.empty() || violations > 0) ? 1 : 0;
}

int cmd_compare(const fs::path& fit_a, const fs::path& fit_b, const fs::path& out_file) {
  auto load = [](const fs::path& dir) {
    json manifest = json::parse(read_file(dir / "manifest.json"));
    std::map<std::string, double> waic_vals;
    Eigen::Index T = 0;
    for (const auto& line : split(read_file(dir / "waic.csv"), '\n')) {
      auto cells = split(line, ',');
      if (cells.size() != 2) continue;
      if (cells[0] == "T")
        T = std::stol(cells[1]);
      else
        waic_vals[cells[0]] = std::stod(cells[1]);
    }
    WaicReport rep;
    rep.lppd = waic_vals.at("lppd");
    rep.p_waic = waic_vals.at("p_waic");
    rep.waic = waic_vals.at("waic");
    rep.per_point = Eigen::VectorXd::Zero(T);
    return std::make_pair(manifest, rep);
  };

  auto [man_a, rep_a] = load(fit_a);
  auto [man_b, rep_b] = load(fit_b);
  if (man_a["data_hash"] != man_b["data_hash"])
    throw std::runtime_error("cmd_compare: fits were run on different data (hash mismatch)");

  std::string name_a = fit_a.filename().string();
  std::string name_b = fit_b.filename().string();
  if (name_a == name_b) name_b += "_b";
  auto ranking = compare_models({{name_a, rep_a}, {name_b, rep_b}});

  std::ostringstream os;
  os << "model,waic,diff_to_best\n";
  for (const auto& r : ranking)
    os << r.name << "," << fmt17(r.waic) << "," << fmt17(r.diff_to_best) << "\n";
  bool tie = ranking[0].waic == ranking[1].waic;
  os << "selected," << (tie ? "tie" : ranking[0].name) << ",\n";
  std::cout << os.str();
  write_file(out_file.empty() ? fs::path("comparison.csv") : out_file, os.str());
  return 0;
}

int cmd_diagnose(const fs::path& fit_dir, const fs::path& data_csv) {
  json manifest = json::parse(read_file(fit_dir / "manifest.json"));
  json jcfg = manifest["config"];
  RunConfig cfg;
  cfg.model_kind = jcfg["model.kind"].get<std::string>();
  cfg.dim = jcfg["model.dim"].get<int>();
  cfg.garch_enabled = jcfg["garch.enabled"].get<bool>();
  cfg.p = jcfg["garch.p"].get<int>();
  cfg.q = jcfg["garch.q"].get<int>();
  cfg.init_c0_diag = jcfg["init.c0_diag"].get<double>();

  CsvData csv = read_csv(data_csv);
  if (csv.series.n() != cfg.dim)
    throw std::runtime_error("cmd_diagnose: data has " + std::to_string(csv.series.n()) +
                             " series, fit expects " + std::to_string(cfg.dim));
  FitSpec fit = cfg.build_fit();
  const Eigen::Index n = fit.spec.n();
  const Eigen::Index r = fit.spec.r();
  const Eigen::Index T = csv.series.T();

  // posterior medians of the sampled parameters
  auto draws_txt = read_file(fit_dir / "draws.csv");
  auto lines = split(draws_txt, '\n');
  if (lines.size() < 2) throw std::runtime_error("cmd_diagnose: empty draws file");
  auto header = split(lines[0], ',');
  std::map<std::string, std::vector<double>> cols;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    if (trim(lines[li]).empty()) continue;
    auto cells = split(lines[li], ',');
    for (std::size_t c = 2; c < cells.size() && c < header.size(); ++c)
      cols[header[c]].push_back(std::stod(cells[c]));
  }
  auto med = [&](const std::string& name) {
    auto it = cols.find(name);
    if (it == cols.end())
      throw std::runtime_error("cmd_diagnose: missing parameter column " + name);
    return quantile(it->second, 0.5);
  };

  GarchParams garch = GarchParams::zeros(n, cfg.p, cfg.q);
  Eigen::MatrixXd R = Eigen::MatrixXd::Identity(n, n);
  if (cfg.garch_enabled) {
    for (Eigen::Index i = 0; i < n; ++i) {
      garch.alpha0[i] = med("alpha0_" + std::to_string(i + 1));
      for (int j = 1; j <= cfg.p; ++j)
        garch.alpha[i][j - 1] = med("alpha" + std::to_string(j) + "_" + std::to_string(i + 1));
      for (int j = 1; j <= cfg.q; ++j)
        garch.beta[i][j - 1] = med("beta" + std::to_string(j) + "_" + std::to_string(i + 1));
    }
    if (n == 2) {
      R = correlation_from_rho(med("rho"));
    } else if (n > 2) {
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j)
          R(i, j) = R(j, i) = med("rho_" + std::to_string(i + 1) + "_" + std::to_string(j + 1));
    }
  } else {
    Eigen::MatrixXd V(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = i; j < n; ++j)
        V(i, j) = V(j, i) = med("V_" + std::to_string(i + 1) + "_" + std::to_string(j + 1));
    for (Eigen::Index i = 0; i < n; ++i) garch.alpha0[i] = V(i, i);
    Eigen::VectorXd d = V.diagonal().array().sqrt().inverse();
    R = d.asDiagonal() * V * d.asDiagonal();
  }
  Eigen::MatrixXd W(r, r);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = i; j < r; ++j)
      W(i, j) = W(j, i) = med("W_" + std::to_string(i + 1) + "_" + std::to_string(j + 1));

  // posterior mean states from the paths file
  CsvData paths = read_csv(fit_dir / "paths.csv");
  if (paths.series.T() != T + 1)
    throw std::runtime_error("cmd_diagnose: paths file does not match data length");
  Eigen::MatrixXd state_mean(T + 1, r);
  for (Eigen::Index j = 0; j < r; ++j) {
    auto it = std::find(paths.names.begin(), paths.names.end(),
                        "state_mean_" + std::to_string(j + 1));
    if (it == paths.names.end())
      throw std::runtime_error("cmd_diagnose: paths file missing state columns");
    auto cidx = static_cast<Eigen::Index>(it - paths.names.begin());
    state_mean.col(j) = paths.series.y.col(cidx);
  }

  ResidualReport rep = residual_analysis(csv.series, fit.spec, garch, R, {W}, state_mean);

  {
    std::vector<std::string> rcols = {"t"};
    for (Eigen::Index i = 0; i < n; ++i) rcols.push_back("raw_" + std::to_string(i + 1));
    for (Eigen::Index i = 0; i < n; ++i) rcols.push_back("standardized_" + std::to_string(i + 1));
    Eigen::MatrixXd M(T, 1 + 2 * n);
    for (Eigen::Index t = 0; t < T; ++t) {
      M(t, 0) = static_cast<double>(t + 1);
      for (Eigen::Index i = 0; i < n; ++i) {
        M(t, 1 + i) = rep.raw(t, i);
        M(t, 1 + n + i) = rep.standardized(t, i);
      }
    }
    write_matrix_csv(fit_dir / "residuals.csv", M, rcols);
  }
  {
    std::ostringstream os;
    os << "series,theoretical,empirical,ks_stat,ks_p\n";
    for (Eigen::Index i = 0; i < n; ++i)
      for (const auto& [tq, eq] : rep.qq[i])
        os << (i + 1) << "," << fmt17(tq) << "," << fmt17(eq) << "," << fmt17(rep.ks[i].statistic)
           << "," << fmt17(rep.ks[i].p_value) << "\n";
    write_file(fit_dir / "qq.csv", os.str());
  }
  return 0;
}

}  // namespace garchssm
