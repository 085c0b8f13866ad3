#include "metaridge/risk.hpp"

#include <Eigen/Cholesky>

#include <cmath>

namespace metaridge {

namespace {

void check_risk_args(Eigen::Index p, const SpdMatrix& sigma_test,
                     const SymmetricMatrix& sigma_hat, double sigma2, double lambda,
                     int n_test) {
  if (sigma_test.dim() != p || sigma_hat.dim() != p)
    throw DimensionMismatchError("risk: covariance dimensions differ");
  if (!(lambda > 0.0)) throw NonPositiveLambdaError("risk: lambda must be > 0");
  if (sigma2 < 0.0) throw ConfigError("risk: sigma2 must be >= 0");
  if (n_test < 1) throw DimensionMismatchError("risk: n_test must be >= 1");
}

RiskBreakdown assemble(double sigma2, double bias, double varcorr, double var) {
  RiskBreakdown r;
  r.noise = sigma2;
  r.bias = bias;
  r.variance_correction = varcorr;
  r.variance = var;
  r.total = sigma2 + bias + varcorr + var;
  return r;
}

}  // namespace

RiskBreakdown plugin_risk_exact(const SpdMatrix& coef_cov, const SpdMatrix& weight,
                                const SpdMatrix& sigma_test, const SymmetricMatrix& sigma_hat,
                                double sigma2, double lambda, int n_test) {
  const Eigen::Index p = weight.dim();
  if (coef_cov.dim() != p)
    throw DimensionMismatchError("plugin_risk_exact: coefficient covariance dimension differs");
  check_risk_args(p, sigma_test, sigma_hat, sigma2, lambda, n_test);

  const Eigen::MatrixXd wh = detail::sym_sqrt(weight.mat());
  const Eigen::MatrixXd wmh = detail::sym_pow(weight.mat(), -0.5);
  const Eigen::MatrixXd lam_pop = wh * sigma_test.mat() * wh;   // weighted population spectrum
  const Eigen::MatrixXd lam_smp = wh * sigma_hat.mat() * wh;    // weighted sample spectrum
  const Eigen::MatrixXd mism = wmh * coef_cov.mat() * wmh;      // weight/coefficient mismatch

  Eigen::MatrixXd shifted = lam_smp + lambda * Eigen::MatrixXd::Identity(p, p);
  shifted = ((shifted + shifted.transpose()) / 2.0).eval();
  Eigen::LLT<Eigen::MatrixXd> llt(shifted);
  if (llt.info() != Eigen::Success)
    throw NotSpdError("plugin_risk_exact: shifted sample spectrum not positive definite");
  const Eigen::MatrixXd res = llt.solve(Eigen::MatrixXd::Identity(p, p));

  const double pd = static_cast<double>(p);
  const double nd = static_cast<double>(n_test);
  const double bias = lambda * lambda / pd * (mism * res * lam_pop * res).trace();
  const double varcorr = -lambda * sigma2 / nd * (lam_pop * res * res).trace();
  const double var = sigma2 / nd * (lam_pop * res).trace();
  return assemble(sigma2, bias, varcorr, var);
}

RiskBreakdown oracle_risk_exact(const SpdMatrix& omega, const SpdMatrix& sigma_test,
                                const SymmetricMatrix& sigma_hat, double sigma2,
                                double lambda, int n_test) {
  return plugin_risk_exact(omega, omega, sigma_test, sigma_hat, sigma2, lambda, n_test);
}

RiskBreakdown plugin_risk_exact_alt(const SpdMatrix& coef_cov, const SpdMatrix& weight,
                                    const SpdMatrix& sigma_test,
                                    const SymmetricMatrix& sigma_hat, double sigma2,
                                    double lambda, int n_test) {
  const Eigen::Index p = weight.dim();
  if (coef_cov.dim() != p)
    throw DimensionMismatchError("plugin_risk_exact_alt: coefficient covariance dimension differs");
  check_risk_args(p, sigma_test, sigma_hat, sigma2, lambda, n_test);

  const Eigen::MatrixXd winv = detail::sym_pow(weight.mat(), -1.0);
  Eigen::MatrixXd shifted = sigma_hat.mat() + lambda * winv;
  shifted = ((shifted + shifted.transpose()) / 2.0).eval();
  Eigen::LLT<Eigen::MatrixXd> llt(shifted);
  if (llt.info() != Eigen::Success)
    throw NotSpdError("plugin_risk_exact_alt: shifted system not positive definite");
  const Eigen::MatrixXd b = llt.solve(Eigen::MatrixXd::Identity(p, p));

  const double pd = static_cast<double>(p);
  const double nd = static_cast<double>(n_test);
  const double bias =
      lambda * lambda / pd * (coef_cov.mat() * winv * b * sigma_test.mat() * b * winv).trace();
  const double varcorr = -lambda * sigma2 / nd * (b * sigma_test.mat() * b * winv).trace();
  const double var = sigma2 / nd * (sigma_test.mat() * b).trace();
  return assemble(sigma2, bias, varcorr, var);
}

double conditional_risk(const Eigen::VectorXd& beta_hat, const Eigen::VectorXd& beta_true,
                        const SpdMatrix& sigma_test, double sigma2) {
  if (beta_hat.size() != beta_true.size() || beta_hat.size() != sigma_test.dim())
    throw DimensionMismatchError("conditional_risk: dimension mismatch");
  const Eigen::VectorXd d = beta_true - beta_hat;
  return sigma2 + d.dot(sigma_test.mat() * d);
}

std::pair<double, double> empirical_risk_with_stderr(const Eigen::VectorXd& beta_hat,
                                                     const Eigen::VectorXd& beta_true,
                                                     const SpdMatrix& sigma_test, double sigma2,
                                                     int m_test, Rng& rng) {
  if (m_test < 1) throw ConfigError("empirical_risk: m_test must be >= 1");
  if (beta_hat.size() != beta_true.size() || beta_hat.size() != sigma_test.dim())
    throw DimensionMismatchError("empirical_risk: dimension mismatch");
  const Eigen::MatrixXd sigma_half = detail::sym_sqrt(sigma_test.mat());
  const double noise_sd = std::sqrt(sigma2);
  double sum = 0.0, sumsq = 0.0;
  for (int j = 0; j < m_test; ++j) {
    const Eigen::VectorXd x = sigma_half * rng.normal_vector(beta_hat.size());
    const double y = x.dot(beta_true) + noise_sd * rng.normal();
    const double e = x.dot(beta_hat) - y;
    sum += e * e;
    sumsq += e * e * e * e;
  }
  const double mean = sum / m_test;
  const double var = std::max(0.0, sumsq / m_test - mean * mean);
  const double se = m_test > 1 ? std::sqrt(var / (m_test - 1)) : 0.0;
  return {mean, se};
}

double empirical_risk(const Eigen::VectorXd& beta_hat, const Eigen::VectorXd& beta_true,
                      const SpdMatrix& sigma_test, double sigma2, int m_test, Rng& rng) {
  return empirical_risk_with_stderr(beta_hat, beta_true, sigma_test, sigma2, m_test, rng).first;
}

SymmetricMatrix risk_gradient(const SpdMatrix& omega, const SpdMatrix& weight,
                              const SpdMatrix& sigma_test, const SymmetricMatrix& sigma_hat,
                              double sigma2, double lambda, int n_test) {
  const Eigen::Index p = weight.dim();
  if (omega.dim() != p) throw DimensionMismatchError("risk_gradient: omega dimension differs");
  check_risk_args(p, sigma_test, sigma_hat, sigma2, lambda, n_test);

  const Eigen::MatrixXd pmat = detail::sym_pow(weight.mat(), -1.0);
  Eigen::MatrixXd shifted = sigma_hat.mat() + lambda * pmat;
  shifted = ((shifted + shifted.transpose()) / 2.0).eval();
  Eigen::LLT<Eigen::MatrixXd> llt(shifted);
  if (llt.info() != Eigen::Success)
    throw NotSpdError("risk_gradient: shifted system not positive definite");
  const Eigen::MatrixXd b = llt.solve(Eigen::MatrixXd::Identity(p, p));

  const double pd = static_cast<double>(p);
  const double nd = static_cast<double>(n_test);
  const Eigen::MatrixXd mid =
      (lambda / pd) * pmat * omega.mat() - (sigma2 / nd) * Eigen::MatrixXd::Identity(p, p);
  const Eigen::MatrixXd g = b * sigma_test.mat() * b * mid * sigma_hat.mat() * b;
  Eigen::MatrixXd grad = 2.0 * lambda *
      (g + g.transpose() - Eigen::MatrixXd(g.diagonal().asDiagonal()));
  return SymmetricMatrix(std::move(grad));
}

double optimal_lambda_finite(int p, int n, double sigma2, double c) {
  if (p < 1 || n < 1) throw DimensionMismatchError("optimal_lambda_finite: p, n must be >= 1");
  if (!(sigma2 > 0.0) || !(c > 0.0))
    throw ConfigError("optimal_lambda_finite: sigma2 and c must be > 0");
  return c * static_cast<double>(p) * sigma2 / static_cast<double>(n);
}

}  // namespace metaridge
