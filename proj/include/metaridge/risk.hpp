#pragma once

#include <Eigen/Dense>

#include "metaridge/model.hpp"
#include "metaridge/spd.hpp"

namespace metaridge {

// Exact conditional predictive risk split into noise + bias + the two
// variance terms. variance_correction may be negative; the others are
// nonnegative and total is their sum.
struct RiskBreakdown {
  double noise = 0.0;
  double bias = 0.0;
  double variance_correction = 0.0;
  double variance = 0.0;
  double total = 0.0;
};

// Risk of the ridge fit weighted by the true hyper-covariance, conditional
// on the test design. sigma_hat may be rank deficient; all resolvents are
// shifted by lambda so no inversion of sigma_hat occurs.
RiskBreakdown oracle_risk_exact(const SpdMatrix& omega, const SpdMatrix& sigma_test,
                                const SymmetricMatrix& sigma_hat, double sigma2,
                                double lambda, int n_test);

// Risk of the ridge fit weighted by an arbitrary SPD matrix `weight`, with
// test-task coefficient covariance `coef_cov` (equal to the training
// hyper-covariance in distribution, different under covariate shift).
// Coincides with oracle_risk_exact when weight == coef_cov.
RiskBreakdown plugin_risk_exact(const SpdMatrix& coef_cov, const SpdMatrix& weight,
                                const SpdMatrix& sigma_test, const SymmetricMatrix& sigma_hat,
                                double sigma2, double lambda, int n_test);

// Same quantity computed through the unreduced algebraic route
// (sigma_hat + lambda * weight^{-1})^{-1}; requires a well-conditioned
// weight. Used to cross-check plugin_risk_exact.
RiskBreakdown plugin_risk_exact_alt(const SpdMatrix& coef_cov, const SpdMatrix& weight,
                                    const SpdMatrix& sigma_test,
                                    const SymmetricMatrix& sigma_hat, double sigma2,
                                    double lambda, int n_test);

// sigma2 + (beta_true - beta_hat)^T Sigma (beta_true - beta_hat).
double conditional_risk(const Eigen::VectorXd& beta_hat, const Eigen::VectorXd& beta_true,
                        const SpdMatrix& sigma_test, double sigma2);

// Monte-Carlo risk over m_test fresh draws x ~ N(0, Sigma),
// y = x^T beta_true + eps.
double empirical_risk(const Eigen::VectorXd& beta_hat, const Eigen::VectorXd& beta_true,
                      const SpdMatrix& sigma_test, double sigma2, int m_test, Rng& rng);

// Empirical risk together with its Monte-Carlo standard error.
std::pair<double, double> empirical_risk_with_stderr(const Eigen::VectorXd& beta_hat,
                                                     const Eigen::VectorXd& beta_true,
                                                     const SpdMatrix& sigma_test, double sigma2,
                                                     int m_test, Rng& rng);

// Riemannian gradient of the predictive risk as a function of the inverse
// weight matrix P = weight^{-1}, used as an optimality diagnostic. With
// B = (sigma_hat + lambda P)^{-1} and
// G = B Sigma B (lambda/p P Omega - sigma2/n I) sigma_hat B, the gradient
// is 2 lambda (G + G^T - diag(G)). Vanishes at P = (p sigma2/(lambda n))
// Omega^{-1}.
SymmetricMatrix risk_gradient(const SpdMatrix& omega, const SpdMatrix& weight,
                              const SpdMatrix& sigma_test, const SymmetricMatrix& sigma_hat,
                              double sigma2, double lambda, int n_test);

// Finite-sample optimal penalty c * p * sigma2 / n; the paired optimal
// weight is c * Omega.
double optimal_lambda_finite(int p, int n, double sigma2, double c);

}  // namespace metaridge
