#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

#include "metaridge/model.hpp"
#include "metaridge/spd.hpp"

namespace metaridge {

// Generalized ridge fit beta = (X^T X + n lambda A^{-1})^{-1} X^T y.
struct RidgeFit {
  Eigen::VectorXd beta;
  double lambda = 0.0;
  std::string weight_label;
};

RidgeFit generalized_ridge(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double lambda,
                           const SpdMatrix& weight, std::string weight_label = "");

// Options shared by the Riemannian fits. step/smooth_bound of 0 request a
// power-iteration estimate of the quadratic term's operator norm (smooth
// constant); grad_tol doubles as the objective-decrease tolerance for the
// proximal fits.
struct FitOptions {
  std::optional<SpdMatrix> init;
  double step = 0.0;
  int max_iter = 500;
  double grad_tol = 1e-6;
  double lambda_tilde = 0.0;
  double smooth_bound = 0.0;
  double eig_floor = 1e-8;
};

struct FitReport {
  SpdMatrix omega_hat;
  int iterations = 0;
  double final_grad_norm = 0.0;
  std::vector<double> objective_trace;
  bool converged = false;
};

// Moment-matching problem: mean over tasks of
// || M_l - X_l Omega X_l^T / p - sigma2 I ||_F^2, where M_l is y_l y_l^T
// for observed data or an explicitly supplied second-moment matrix.
// Stores per-task sufficient statistics so objective and gradient cost
// O(L p^3) regardless of the n_l.
class MomProblem {
 public:
  static MomProblem from_dataset(const MetaDataset& data,
                                 std::optional<double> sigma2_override = std::nullopt);
  static MomProblem from_moments(const std::vector<Eigen::MatrixXd>& designs,
                                 const std::vector<Eigen::MatrixXd>& moments, double sigma2);

  double objective(const Eigen::MatrixXd& omega) const;
  // Frobenius gradient; pairs with directional derivatives along
  // second-order retraction curves.
  Eigen::MatrixXd gradient(const Eigen::MatrixXd& omega) const;
  double value_and_gradient(const Eigen::MatrixXd& omega, Eigen::MatrixXd* grad) const;
  // Operator norm of the quadratic term's Hessian map, via power iteration.
  double smooth_bound() const;
  Eigen::Index dim() const { return p_; }
  double sigma2() const { return sigma2_; }

 private:
  MomProblem() = default;
  Eigen::Index p_ = 0;
  double sigma2_ = 0.0;
  double const_term_ = 0.0;        // mean ||M - sigma2 I||_F^2
  Eigen::MatrixXd g0_;             // mean X^T (M - sigma2 I) X
  std::vector<Eigen::MatrixXd> cs_;  // X^T X per task
};

double mom_objective(const SpdMatrix& omega, const MetaDataset& data);
SymmetricMatrix mom_gradient(const SpdMatrix& omega, const MetaDataset& data);

// Riemannian gradient descent on the moment objective with backtracking
// from opts.step (default 1/smooth_bound). Terminates on grad_tol or
// max_iter; an iterate that cannot be improved at any step size returns
// early with the current point.
FitReport fit_mom_rgd(const MetaDataset& data, const FitOptions& opts);
FitReport fit_mom_rgd(const MomProblem& problem, const FitOptions& opts);

// Moment objective plus the off-diagonal L1 penalty
// lambda_tilde * sum_{i != j} |Omega_ij| (ordered pairs).
double l1_objective(const SpdMatrix& omega, const MetaDataset& data, double lambda_tilde);

// Proximal Riemannian descent: Euclidean gradient step, off-diagonal
// soft-threshold at lambda_tilde/(2 Lt), second-order retraction, accept
// on decrease of the penalized objective; candidates below eig_floor are
// eigenvalue-floored. Terminates when the decrease falls under grad_tol.
FitReport fit_l1_prox_rgd(const MetaDataset& data, const FitOptions& opts);
FitReport fit_l1_prox_rgd(const MomProblem& problem, const FitOptions& opts);

// Gaussian negative log-likelihood (additive constant dropped):
// (1/2) sum_l [ log det S_l + y_l^T S_l^{-1} y_l ],
// S_l = sigma2 I + X_l Omega X_l^T / p.
double mle_negloglik(const SpdMatrix& omega, double sigma2, const MetaDataset& data);
SymmetricMatrix mle_gradient(const SpdMatrix& omega, double sigma2, const MetaDataset& data);

// Riemannian descent on the negative log-likelihood. The objective is not
// geodesically convex; only stationarity is guaranteed.
FitReport fit_mle_rgd(const MetaDataset& data, double sigma2, const FitOptions& opts);

// Noise-variance estimate from one task. May be negative in small
// samples; returned as-is with a flag.
struct Sigma2Estimate {
  double value = 0.0;
  bool negative = false;
};
Sigma2Estimate dicker_sigma2(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                             const SpdMatrix& sigma_hat);

// (X^T X)^{-1} X^T y for a full-column-rank design.
Eigen::VectorXd left_inverse_apply(const Eigen::MatrixXd& x, const Eigen::VectorXd& y);

// Diagonal of the coefficient second moment, scaled by p, from full-rank
// noiseless tasks: W_ii = [(p/L0) sum_l z_l z_l^T]_ii.
SpdMatrix diag_weight(const std::vector<Task>& tasks);

// Two-stage correlation-based estimate: omega = W^{1/2} Theta W^{1/2}.
struct CorrelationFit {
  SpdMatrix omega;
  Eigen::MatrixXd theta;
  Eigen::VectorXd w_diag;
};

// All tasks full rank and noiseless: Theta solves the separable
// soft-threshold problem in closed form (off-diagonals of p * mean
// normalized second moment thresholded at lambda_tilde p^2 / 2, unit
// diagonal), with an eigenvalue-floor projection only when needed.
CorrelationFit fit_correlation_fullrank(const std::vector<Task>& tasks, double lambda_tilde,
                                        double eig_floor = 1e-8);

// W from the first l0 full-rank tasks; Theta fit on the remaining tasks by
// proximal descent on the weighted moment objective restricted to unit
// diagonal (diagonal reset after each step).
CorrelationFit fit_correlation_split(const std::vector<Task>& tasks, int l0,
                                     double lambda_tilde, const FitOptions& opts);

}  // namespace metaridge
