#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "metaridge/estimators.hpp"
#include "metaridge/model.hpp"
#include "metaridge/stieltjes.hpp"

namespace metaridge {

struct LambdaRule {
  enum class Kind { Fixed, ScaledOptimal };
  Kind kind = Kind::ScaledOptimal;
  double value = 1.0;  // the fixed lambda, or the scale c in c * p * sigma2 / n_new

  double lambda_for(int p, double sigma2, int n_new) const;
};

enum class EstimatorKind {
  OracleOmega,
  Identity,
  MomRgd,
  MomL1,
  Mle,
  CorrelationSplit,
  CorrelationFullRank
};

enum class InitKind { Identity, RandomSpd, MomOutput };

enum class RiskMetric { Empirical, Exact, Both };

enum class LimitMode { Auto, Surrogate, ClosedForm };

struct ExperimentConfig {
  int p = 32;
  std::vector<std::pair<int, int>> n_schedule;  // (n_l, count) pairs, in order
  std::vector<int> n_new;
  int runs = 50;
  OmegaSpec omega;
  SigmaSpec sigma_train;
  SigmaSpec sigma_test;
  double sigma2 = 1.0;
  std::string sigma2_mode = "known";  // "known" or "dicker"
  LambdaRule lambda_rule;
  EstimatorKind estimator = EstimatorKind::MomRgd;
  int l0 = 0;  // CorrelationSplit full-rank head size
  InitKind init = InitKind::Identity;
  std::uint64_t init_seed = 0;
  double lambda_tilde = 0.0;
  int surrogate_scale = 16;  // p_tilde = scale * p, n_tilde = scale * n_new
  int m_test = 200;
  std::uint64_t seed = 0;
  RiskMetric risk_metric = RiskMetric::Empirical;
  LimitMode limit_mode = LimitMode::Auto;
  FitOptions fit;

  int total_tasks() const;
  std::vector<int> expand_schedule() const;
};

struct SummaryRow {
  int n_new = 0;
  double risk_identity = 0.0;
  double risk_estimated = 0.0;
  double risk_limit = 0.0;
  double diff_pct = 0.0;
  std::optional<double> frob_err;
  int run_count = 0;
  std::uint64_t seed = 0;
  // Populated only when risk_metric == Both.
  std::optional<double> risk_identity_exact;
  std::optional<double> risk_estimated_exact;
};

struct RunRecord {
  int index = 0;
  std::uint64_t data_seed = 0;
  std::uint64_t x_new_hash = 0;  // FNV-1a over the new-task design bytes
  bool failed = false;
  std::string error;
};

struct ExperimentResult {
  std::vector<SummaryRow> rows;
  std::vector<RunRecord> runs;
};

// Full simulation loop: per run, draw the training tasks, estimate the
// hyper-covariance, draw the new task, fit the ridge predictors with the
// estimated weight and the identity weight, and evaluate their risks.
// Per-run seeds are derived from config.seed by a counter split, and the
// data stream never depends on the estimator choice. Runs execute in
// parallel up to METARIDGE_THREADS; results reduce in run order.
ExperimentResult run_experiment(const ExperimentConfig& config);

// Limiting risk at the given lambda for the configured population pair,
// resolved per config.limit_mode (closed form / analytic-law fixed point /
// surrogate spectrum estimate). n_new defaults to the first configured one.
double limiting_risk_for(const ExperimentConfig& config, double lambda, int n_new);

// Surrogate estimate: draws a p_tilde x n_tilde instance of the configured
// population pair (p_tilde/n_tilde = p/n_new exactly), reads the transform
// pair off its eigenvalues, and plugs into the limiting-risk expression.
double surrogate_limiting_risk(const ExperimentConfig& config, double lambda);
double surrogate_limiting_risk(const ExperimentConfig& config, double lambda, int n_new,
                               std::uint64_t stream);

struct RiskCurvePoint {
  double lambda = 0.0;
  double risk = 0.0;
  bool converged = true;
  int iterations = 0;
  double residual = 0.0;
};

std::vector<RiskCurvePoint> risk_curve(const ExperimentConfig& config,
                                       const std::vector<double>& lambda_grid);

struct CSweepPoint {
  double c = 0.0;
  double risk = 0.0;
};

// Empirical plug-in risk as a function of the scale c in
// lambda = c * p * sigma2 / n_new, sharing one estimator fit per run.
std::vector<CSweepPoint> c_sweep(const ExperimentConfig& config,
                                 const std::vector<double>& c_grid);

// CSV/JSON emission. CSV header:
// n_new,risk_identity,risk_estimated,risk_limit,diff_pct,frob_err,run_count,seed
// (plus the two exact-risk columns when rows carry them). Floats print
// with 17 significant digits.
void emit_csv(const std::vector<SummaryRow>& rows, std::ostream& out);
void emit_json(const std::vector<SummaryRow>& rows, std::ostream& out);
void emit(const std::vector<SummaryRow>& rows, const std::string& format,
          const std::string& path);
std::vector<SummaryRow> parse_summary_json(std::istream& in);

// Flat key = value configuration file.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig parse_config_file(const std::string& path);

// Plain-text task archive: header "p L", then per task a line n_l followed
// by n_l rows of p+1 reals (x row, then y).
MetaDataset read_task_archive(std::istream& in);
void write_task_archive(const MetaDataset& data, std::ostream& out);

// Dense text matrix with 17 significant digits.
void write_matrix(const Eigen::MatrixXd& m, std::ostream& out);

// Estimate the hyper-covariance on the given dataset per the configured
// estimator; used by run_experiment and the CLI `estimate` command.
SpdMatrix estimate_omega(const MetaDataset& data, const ExperimentConfig& config, Rng& rng_est);

int thread_budget();

}  // namespace metaridge
