#include "metaridge/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <limits>
#include <thread>

#include "metaridge/risk.hpp"

namespace metaridge {

namespace {

// Stream ids for the per-run counter split; adding runs or streams never
// reshuffles earlier draws.
constexpr std::uint64_t kStreamData = 0;
constexpr std::uint64_t kStreamEstimator = 1;
constexpr std::uint64_t kStreamTest = 2;
constexpr std::uint64_t kStreamsPerRun = 8;
constexpr std::uint64_t kStreamSurrogate = 0x5u;
constexpr std::uint64_t kStreamInit = 0xA11u;

std::uint64_t fnv1a(const double* data, std::size_t count) {
  std::uint64_t h = 1469598103934665603ULL;
  const unsigned char* bytes = reinterpret_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < count * sizeof(double); ++i) {
    h ^= bytes[i];
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

double LambdaRule::lambda_for(int p, double sigma2, int n_new) const {
  if (kind == Kind::Fixed) return value;
  return value * static_cast<double>(p) * sigma2 / static_cast<double>(n_new);
}

int ExperimentConfig::total_tasks() const {
  int total = 0;
  for (const auto& [n, count] : n_schedule) total += count;
  return total;
}

std::vector<int> ExperimentConfig::expand_schedule() const {
  std::vector<int> out;
  out.reserve(total_tasks());
  for (const auto& [n, count] : n_schedule) {
    if (n < 1 || count < 1) throw ConfigError("n_schedule entries must be positive");
    for (int i = 0; i < count; ++i) out.push_back(n);
  }
  if (out.empty()) throw ConfigError("n_schedule is empty");
  return out;
}

int thread_budget() {
  if (const char* env = std::getenv("METARIDGE_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

namespace {

SpdMatrix random_spd_init(int p, std::uint64_t seed) {
  Rng rng = Rng::derive(seed, kStreamInit);
  const Eigen::MatrixXd a = rng.normal_matrix(p, p);
  Eigen::MatrixXd m = a * a.transpose() / static_cast<double>(p) +
                      Eigen::MatrixXd::Identity(p, p);
  return SpdMatrix((m + m.transpose()) / 2.0);
}

FitOptions fit_options_for(const ExperimentConfig& config, int p) {
  FitOptions opts = config.fit;
  switch (config.init) {
    case InitKind::Identity:
      opts.init = SpdMatrix::identity(p);
      break;
    case InitKind::RandomSpd:
      opts.init = random_spd_init(p, config.init_seed);
      break;
    case InitKind::MomOutput:
      opts.init.reset();  // resolved by the caller
      break;
  }
  if (opts.lambda_tilde == 0.0) opts.lambda_tilde = config.lambda_tilde;
  return opts;
}

}  // namespace

SpdMatrix estimate_omega(const MetaDataset& data, const ExperimentConfig& config,
                         Rng& rng_est) {
  (void)rng_est;
  const int p = static_cast<int>(data.p());
  FitOptions opts = fit_options_for(config, p);

  // Resolve the noise variance for the moment/likelihood objectives.
  double sigma2 = data.sigma2;
  const MetaDataset* fit_data = &data;
  MetaDataset held_out;
  if (config.sigma2_mode == "dicker") {
    if (data.tasks.size() < 2)
      throw ConfigError("sigma2_mode=dicker needs at least two tasks");
    const Task& t0 = data.tasks.front();
    const SpdMatrix sigma = realize_sigma(config.sigma_train,
                                          realize_omega(config.omega, p));
    const Sigma2Estimate est = dicker_sigma2(t0.x, t0.y, sigma);
    sigma2 = std::max(0.0, est.value);
    held_out.tasks.assign(data.tasks.begin() + 1, data.tasks.end());
    held_out.omega_true = data.omega_true;
    held_out.sigma2 = sigma2;
    fit_data = &held_out;
  }

  switch (config.estimator) {
    case EstimatorKind::OracleOmega:
      if (!data.omega_true) throw ConfigError("oracle estimator requires a known omega");
      return *data.omega_true;
    case EstimatorKind::Identity:
      return SpdMatrix::identity(p);
    case EstimatorKind::MomRgd: {
      if (!opts.init) opts.init = SpdMatrix::identity(p);
      MomProblem prob = MomProblem::from_dataset(*fit_data, sigma2);
      return fit_mom_rgd(prob, opts).omega_hat;
    }
    case EstimatorKind::MomL1: {
      if (!opts.init) opts.init = SpdMatrix::identity(p);
      MomProblem prob = MomProblem::from_dataset(*fit_data, sigma2);
      return fit_l1_prox_rgd(prob, opts).omega_hat;
    }
    case EstimatorKind::Mle: {
      if (config.init == InitKind::MomOutput) {
        FitOptions mom_opts = opts;
        mom_opts.init = SpdMatrix::identity(p);
        MomProblem prob = MomProblem::from_dataset(*fit_data, sigma2);
        opts.init = fit_mom_rgd(prob, mom_opts).omega_hat;
      } else if (!opts.init) {
        opts.init = SpdMatrix::identity(p);
      }
      return fit_mle_rgd(*fit_data, sigma2, opts).omega_hat;
    }
    case EstimatorKind::CorrelationFullRank:
      return fit_correlation_fullrank(fit_data->tasks, config.lambda_tilde, opts.eig_floor)
          .omega;
    case EstimatorKind::CorrelationSplit:
      return fit_correlation_split(fit_data->tasks, config.l0, config.lambda_tilde, opts)
          .omega;
  }
  throw ConfigError("estimate_omega: unknown estimator kind");
}

namespace {

struct RunOutput {
  RunRecord record;
  // Per configured n_new: identity/estimated risks per metric and the
  // Frobenius error of the estimate.
  std::vector<double> risk_id, risk_est, risk_id_exact, risk_est_exact;
  double frob_err = 0.0;
};

RunOutput execute_run(const ExperimentConfig& config, int run, const SpdMatrix& omega,
                      const SpdMatrix& sigma_train_unused, const SpdMatrix& sigma_test) {
  (void)sigma_train_unused;
  RunOutput out;
  out.record.index = run;
  const std::uint64_t base = static_cast<std::uint64_t>(run) * kStreamsPerRun;
  out.record.data_seed = Rng::mix(config.seed, base + kStreamData);
  Rng rng_data(out.record.data_seed);
  Rng rng_est = Rng::derive(config.seed, base + kStreamEstimator);
  Rng rng_test = Rng::derive(config.seed, base + kStreamTest);

  try {
    MetaDataset data = sample_meta_dataset(config.expand_schedule(), omega,
                                           config.sigma_train, config.sigma2, rng_data);
    const SpdMatrix omega_hat = estimate_omega(data, config, rng_est);
    out.frob_err = (omega_hat.mat() - omega.mat()).norm();
    const SpdMatrix identity = SpdMatrix::identity(config.p);

    std::uint64_t hash = 1469598103934665603ULL;
    for (int n_new : config.n_new) {
      const Task fresh =
          sample_task(omega, sigma_test, config.sigma2, n_new, rng_data);
      hash ^= fnv1a(fresh.x.data(), static_cast<std::size_t>(fresh.x.size()));
      const double lambda = config.lambda_rule.lambda_for(config.p, config.sigma2, n_new);

      const bool want_empirical = config.risk_metric != RiskMetric::Exact;
      const bool want_exact = config.risk_metric != RiskMetric::Empirical;
      if (want_empirical) {
        const RidgeFit fit_est =
            generalized_ridge(fresh.x, fresh.y, lambda, omega_hat, "estimated");
        const RidgeFit fit_id =
            generalized_ridge(fresh.x, fresh.y, lambda, identity, "identity");
        out.risk_id.push_back(empirical_risk(fit_id.beta, *fresh.beta_true, sigma_test,
                                             config.sigma2, config.m_test, rng_test));
        out.risk_est.push_back(empirical_risk(fit_est.beta, *fresh.beta_true, sigma_test,
                                              config.sigma2, config.m_test, rng_test));
      }
      if (want_exact) {
        const SymmetricMatrix sig_hat = sample_covariance(fresh.x);
        const double r_id = plugin_risk_exact(omega, identity, sigma_test, sig_hat,
                                              config.sigma2, lambda, n_new)
                                .total;
        const double r_est = plugin_risk_exact(omega, omega_hat, sigma_test, sig_hat,
                                               config.sigma2, lambda, n_new)
                                 .total;
        out.risk_id_exact.push_back(r_id);
        out.risk_est_exact.push_back(r_est);
        if (!want_empirical) {
          out.risk_id.push_back(r_id);
          out.risk_est.push_back(r_est);
        }
      }
    }
    out.record.x_new_hash = hash;
  } catch (const Error& e) {
    out.record.failed = true;
    out.record.error = e.what();
  }
  return out;
}

}  // namespace

double surrogate_limiting_risk(const ExperimentConfig& config, double lambda, int n_new,
                               std::uint64_t stream) {
  int scale = config.surrogate_scale;
  if (scale < 1) throw ConfigError("surrogate_limiting_risk: surrogate.scale must be >= 1");
  if (config.omega.kind == OmegaSpec::Kind::Explicit ||
      config.sigma_test.kind == SigmaSpec::Kind::Explicit) {
    scale = 1;  // explicit matrices fix the dimension
  }
  const long long p_t = static_cast<long long>(scale) * config.p;
  const long long n_t = static_cast<long long>(scale) * n_new;
  if (p_t * n_new != n_t * config.p)
    throw ConfigError("surrogate_limiting_risk: surrogate ratio mismatch");

  Rng rng = Rng::derive(config.seed, kStreamSurrogate * 0x10000u + stream);
  const SpdMatrix omega_t = realize_omega(config.omega, static_cast<int>(p_t));
  const SpdMatrix sigma_t = realize_sigma(config.sigma_test, omega_t);
  const Eigen::MatrixXd z = rng.normal_matrix(n_t, p_t);
  const Eigen::MatrixXd x = z * spd_sqrt(sigma_t).mat();

  Eigen::VectorXd eigs;
  if (n_t < p_t) {
    // Nonzero spectrum of the weighted sample matrix lives on the
    // companion; pad the p - n zeros explicitly.
    Eigen::MatrixXd companion =
        x * omega_t.mat() * x.transpose() / static_cast<double>(n_t);
    companion = ((companion + companion.transpose()) / 2.0).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(companion, Eigen::EigenvaluesOnly);
    eigs = Eigen::VectorXd::Zero(p_t);
    eigs.tail(n_t) = es.eigenvalues();
  } else {
    const Eigen::MatrixXd oh = spd_sqrt(omega_t).mat();
    Eigen::MatrixXd lam = oh * (x.transpose() * x / static_cast<double>(n_t)) * oh;
    lam = ((lam + lam.transpose()) / 2.0).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(lam, Eigen::EigenvaluesOnly);
    eigs = es.eigenvalues();
  }
  const auto [s, sp] = stieltjes_from_eigs(eigs.cwiseMax(0.0), lambda);
  StieltjesEval eval;
  eval.s = s;
  eval.s_prime = sp;
  eval.lambda = lambda;
  eval.gamma = static_cast<double>(config.p) / static_cast<double>(n_new);
  std::tie(eval.v, eval.v_prime) = silverstein_invert(s, sp, lambda, eval.gamma);
  return limiting_risk(eval, config.sigma2);
}

double surrogate_limiting_risk(const ExperimentConfig& config, double lambda) {
  if (config.n_new.empty()) throw ConfigError("surrogate_limiting_risk: n_new unset");
  return surrogate_limiting_risk(config, lambda, config.n_new.front(), 0);
}

namespace {

// Analytic limiting law of the weighted population spectrum, when one is
// known for the configured pair.
std::optional<SpectralLaw> analytic_law(const ExperimentConfig& config) {
  const OmegaSpec& om = config.omega;
  const SigmaSpec& sg = config.sigma_test;
  if (om.kind == OmegaSpec::Kind::Tridiagonal) {
    const double hw = 2.0 * std::abs(om.b);
    switch (sg.kind) {
      case SigmaSpec::Kind::Identity:
        return SpectralLaw::shifted_arcsine(om.a, hw);
      case SigmaSpec::Kind::BlockDiag:
        return SpectralLaw::shifted_arcsine(om.a * sg.d, hw * sg.d);
      case SigmaSpec::Kind::PowerOfOmega:
        return SpectralLaw::power_arcsine(om.a, hw, sg.kappa);
      default:
        return std::nullopt;
    }
  }
  if (om.kind == OmegaSpec::Kind::Identity) {
    switch (sg.kind) {
      case SigmaSpec::Kind::Identity:
      case SigmaSpec::Kind::PowerOfOmega:
        return SpectralLaw::point_mass(1.0);
      case SigmaSpec::Kind::BlockDiag:
        return SpectralLaw::point_mass(sg.d);
      default:
        return std::nullopt;
    }
  }
  return std::nullopt;
}

}  // namespace

double limiting_risk_for(const ExperimentConfig& config, double lambda, int n_new) {
  const double gamma = static_cast<double>(config.p) / static_cast<double>(n_new);
  if (config.limit_mode != LimitMode::Surrogate &&
      config.sigma_test.kind == SigmaSpec::Kind::ScaledInverseOmega) {
    return mp_law_risk(lambda, gamma, config.sigma2, config.sigma_test.rho);
  }
  if (config.limit_mode == LimitMode::ClosedForm)
    throw ConfigError("limit=closed_form requires sigma_test = scaled_inverse_omega");
  if (config.limit_mode != LimitMode::Surrogate) {
    if (auto law = analytic_law(config)) {
      return limiting_risk(fixed_point_stieltjes(*law, gamma, lambda), config.sigma2);
    }
  }
  return surrogate_limiting_risk(config, lambda, n_new, 0);
}

namespace {

std::vector<RunOutput> execute_all_runs(const ExperimentConfig& config,
                                        const SpdMatrix& omega, const SpdMatrix& sigma_train,
                                        const SpdMatrix& sigma_test) {
  std::vector<RunOutput> outputs(config.runs);
  const int workers = std::min(thread_budget(), config.runs);
  if (workers <= 1) {
    for (int r = 0; r < config.runs; ++r)
      outputs[r] = execute_run(config, r, omega, sigma_train, sigma_test);
  } else {
    std::atomic<int> next{0};
    auto worker = [&]() {
      for (int r = next.fetch_add(1); r < config.runs; r = next.fetch_add(1))
        outputs[r] = execute_run(config, r, omega, sigma_train, sigma_test);
    };
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return outputs;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
  if (config.runs < 1) throw ConfigError("run_experiment: runs must be >= 1");
  if (config.n_new.empty()) throw ConfigError("run_experiment: n_new unset");
  const SpdMatrix omega = realize_omega(config.omega, config.p);
  const SpdMatrix sigma_train = realize_sigma(config.sigma_train, omega);
  const SpdMatrix sigma_test = realize_sigma(config.sigma_test, omega);

  const std::vector<RunOutput> outputs =
      execute_all_runs(config, omega, sigma_train, sigma_test);

  ExperimentResult result;
  result.runs.reserve(config.runs);
  const std::size_t kn = config.n_new.size();
  std::vector<double> sum_id(kn, 0.0), sum_est(kn, 0.0), sum_id_x(kn, 0.0),
      sum_est_x(kn, 0.0);
  double sum_frob = 0.0;
  int ok = 0;
  for (const RunOutput& out : outputs) {
    result.runs.push_back(out.record);
    if (out.record.failed) continue;
    ++ok;
    sum_frob += out.frob_err;
    for (std::size_t k = 0; k < kn; ++k) {
      sum_id[k] += out.risk_id[k];
      sum_est[k] += out.risk_est[k];
      if (!out.risk_id_exact.empty()) {
        sum_id_x[k] += out.risk_id_exact[k];
        sum_est_x[k] += out.risk_est_exact[k];
      }
    }
  }
  if (ok == 0) return result;  // only failure records; no rows

  for (std::size_t k = 0; k < kn; ++k) {
    SummaryRow row;
    row.n_new = config.n_new[k];
    row.risk_identity = sum_id[k] / ok;
    row.risk_estimated = sum_est[k] / ok;
    const double lambda =
        config.lambda_rule.lambda_for(config.p, config.sigma2, row.n_new);
    row.risk_limit = limiting_risk_for(config, lambda, row.n_new);
    row.diff_pct = 100.0 * (row.risk_estimated - row.risk_limit) / row.risk_limit;
    row.frob_err = sum_frob / ok;
    row.run_count = ok;
    row.seed = config.seed;
    if (config.risk_metric == RiskMetric::Both) {
      row.risk_identity_exact = sum_id_x[k] / ok;
      row.risk_estimated_exact = sum_est_x[k] / ok;
    }
    result.rows.push_back(std::move(row));
  }
  return result;
}

std::vector<RiskCurvePoint> risk_curve(const ExperimentConfig& config,
                                       const std::vector<double>& lambda_grid) {
  if (config.n_new.empty()) throw ConfigError("risk_curve: n_new unset");
  for (std::size_t i = 1; i < lambda_grid.size(); ++i)
    if (!(lambda_grid[i] > lambda_grid[i - 1]))
      throw ConfigError("risk_curve: lambda grid must be ascending");
  const int n_new = config.n_new.front();
  const double gamma = static_cast<double>(config.p) / static_cast<double>(n_new);

  std::vector<RiskCurvePoint> points;
  points.reserve(lambda_grid.size());
  const bool closed_form =
      config.sigma_test.kind == SigmaSpec::Kind::ScaledInverseOmega &&
      config.limit_mode != LimitMode::Surrogate;
  std::optional<SpectralLaw> law;
  if (!closed_form && config.limit_mode != LimitMode::Surrogate) law = analytic_law(config);

  for (double lambda : lambda_grid) {
    RiskCurvePoint pt;
    pt.lambda = lambda;
    try {
      if (closed_form) {
        pt.risk = mp_law_risk(lambda, gamma, config.sigma2, config.sigma_test.rho);
      } else if (law) {
        const StieltjesEval eval = fixed_point_stieltjes(*law, gamma, lambda);
        pt.risk = limiting_risk(eval, config.sigma2);
        pt.iterations = eval.iterations;
        pt.residual = eval.residual;
      } else {
        pt.risk = surrogate_limiting_risk(config, lambda, n_new, 0);
      }
    } catch (const NoConvergenceError& e) {
      pt.converged = false;
      pt.risk = std::numeric_limits<double>::quiet_NaN();
      pt.residual = e.residual;
      pt.iterations = e.iterations;
    }
    points.push_back(pt);
  }
  return points;
}

std::vector<CSweepPoint> c_sweep(const ExperimentConfig& config,
                                 const std::vector<double>& c_grid) {
  if (config.n_new.empty()) throw ConfigError("c_sweep: n_new unset");
  for (double c : c_grid)
    if (!(c > 0.0)) throw ConfigError("c_sweep: c grid must be positive");
  const int n_new = config.n_new.front();
  const SpdMatrix omega = realize_omega(config.omega, config.p);
  const SpdMatrix sigma_test = realize_sigma(config.sigma_test, omega);

  std::vector<double> sums(c_grid.size(), 0.0);
  int ok = 0;
  for (int r = 0; r < config.runs; ++r) {
    const std::uint64_t base = static_cast<std::uint64_t>(r) * kStreamsPerRun;
    Rng rng_data = Rng::derive(config.seed, base + kStreamData);
    Rng rng_est = Rng::derive(config.seed, base + kStreamEstimator);
    Rng rng_test = Rng::derive(config.seed, base + kStreamTest);
    try {
      MetaDataset data = sample_meta_dataset(config.expand_schedule(), omega,
                                             config.sigma_train, config.sigma2, rng_data);
      const SpdMatrix omega_hat = estimate_omega(data, config, rng_est);
      const Task fresh = sample_task(omega, sigma_test, config.sigma2, n_new, rng_data);
      const SymmetricMatrix sig_hat = sample_covariance(fresh.x);
      for (std::size_t k = 0; k < c_grid.size(); ++k) {
        const double lambda =
            c_grid[k] * config.p * config.sigma2 / static_cast<double>(n_new);
        if (config.risk_metric == RiskMetric::Exact) {
          sums[k] += plugin_risk_exact(omega, omega_hat, sigma_test, sig_hat,
                                       config.sigma2, lambda, n_new)
                         .total;
        } else {
          const RidgeFit fit =
              generalized_ridge(fresh.x, fresh.y, lambda, omega_hat, "estimated");
          sums[k] += empirical_risk(fit.beta, *fresh.beta_true, sigma_test, config.sigma2,
                                    config.m_test, rng_test);
        }
      }
      ++ok;
    } catch (const Error&) {
      continue;
    }
  }
  if (ok == 0) throw ConfigError("c_sweep: every run failed");
  std::vector<CSweepPoint> points;
  points.reserve(c_grid.size());
  for (std::size_t k = 0; k < c_grid.size(); ++k)
    points.push_back({c_grid[k], sums[k] / ok});
  return points;
}

}  // namespace metaridge
