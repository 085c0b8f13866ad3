#pragma once

#include <Eigen/Dense>

#include <utility>
#include <vector>

#include "metaridge/errors.hpp"

namespace metaridge {

// Limiting spectral distribution H of the population matrix whose sample
// version drives the resolvent traces. Supported variants:
//  - EmpiricalEigs: finite list of eigenvalues (zeros allowed),
//  - PointMass: single atom,
//  - ShiftedArcsine: law of center + halfwidth*sin(U), U uniform; the
//    large-p limit of the tridiagonal spectrum,
//  - PowerTransformedArcsine: law of (center + halfwidth*sin(U))^(1-kappa),
//    the limit when the design covariance is a -kappa power of the
//    hyper-covariance.
class SpectralLaw {
 public:
  enum class Kind { EmpiricalEigs, PointMass, ShiftedArcsine, PowerTransformedArcsine };

  static SpectralLaw empirical(Eigen::VectorXd eigs);
  static SpectralLaw point_mass(double value);
  static SpectralLaw shifted_arcsine(double center, double halfwidth);
  static SpectralLaw power_arcsine(double center, double halfwidth, double kappa);

  Kind kind() const { return kind_; }

  // integral of t/(1 + v t) dH(t)
  double integral_resolvent(double v) const;
  // integral of t^2/(1 + v t)^2 dH(t)
  double integral_resolvent_sq(double v) const;

 private:
  SpectralLaw() = default;
  double quadrature(double v, bool squared) const;

  Kind kind_ = Kind::PointMass;
  Eigen::VectorXd eigs_;
  double value_ = 1.0;
  double center_ = 0.0, halfwidth_ = 0.0, kappa_ = 0.0;
};

// Stieltjes transform pair of the population spectrum (s) and its
// companion (v), with derivatives, evaluated at z = -lambda.
struct StieltjesEval {
  double s = 0.0;
  double s_prime = 0.0;
  double v = 0.0;
  double v_prime = 0.0;
  double lambda = 0.0;
  double gamma = 0.0;
  int iterations = 0;
  double residual = 0.0;
};

// Trace-of-resolvent estimators over an eigenvalue list:
// s = mean 1/(mu_i + lambda), s' = mean 1/(mu_i + lambda)^2.
std::pair<double, double> stieltjes_from_eigs(const Eigen::VectorXd& eigs, double lambda);

// Companion-to-population conversion at z = -lambda:
// gamma (s + z^{-1}) = v + z^{-1},  gamma (s' - z^{-2}) = v' - z^{-2}.
std::pair<double, double> silverstein_convert(double v, double v_prime, double lambda,
                                              double gamma);
// Inverse map (population to companion).
std::pair<double, double> silverstein_invert(double s, double s_prime, double lambda,
                                             double gamma);

// Solves the companion fixed point v = (lambda + gamma * I1(v))^{-1} at
// z = -lambda, computes v' from the stationarity identity, and converts to
// (s, s'). Applies 0.5 damping if the iteration oscillates.
StieltjesEval fixed_point_stieltjes(const SpectralLaw& law, double gamma, double lambda,
                                    int max_iter = 5000, double tol = 1e-13);

// Limiting predictive risk of the oracle-weighted ridge fit, expressed in
// the transform pair. With D = lambda*gamma*s + (1-gamma) and
// N2 = lambda^2*gamma*s' + (1-gamma):
//   r = (1/D) [ sigma2 + (lambda/gamma - sigma2) (D - N2)/D ].
double limiting_risk(const StieltjesEval& eval, double sigma2);

// Closed-form limiting risk when the design covariance is rho * Omega^{-1}
// (population spectrum a point mass at rho):
//   r = sigma2 + gamma sigma2 rho m(-lambda) + lambda(lambda - gamma sigma2) rho m'(-lambda)
// with m the Marchenko-Pastur-type transform in closed form.
double mp_law_risk(double lambda, double gamma, double sigma2, double rho);

// Value of mp_law_risk at its minimizer lambda = gamma*sigma2, in closed form.
double mp_optimal_risk(double gamma, double sigma2, double rho);

// The limiting-risk minimizer gamma * sigma2.
double optimal_lambda_asymptotic(double gamma, double sigma2);

}  // namespace metaridge
