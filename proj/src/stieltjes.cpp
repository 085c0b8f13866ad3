#include "metaridge/stieltjes.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

namespace metaridge {

namespace {

constexpr double kPi = 3.14159265358979323846;

// 32-point Gauss-Legendre nodes/weights on [-1, 1], computed once via
// Newton iteration on the Legendre recurrence.
struct GaussLegendre32 {
  double node[32];
  double weight[32];
  GaussLegendre32() {
    const int n = 32;
    for (int i = 0; i < (n + 1) / 2; ++i) {
      double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
      double pp = 0.0;
      for (int it = 0; it < 100; ++it) {
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= n; ++k) {
          double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
          p0 = p1;
          p1 = p2;
        }
        pp = n * (x * p1 - p0) / (x * x - 1.0);
        double dx = p1 / pp;
        x -= dx;
        if (std::abs(dx) < 1e-15) break;
      }
      node[i] = -x;
      node[n - 1 - i] = x;
      weight[i] = weight[n - 1 - i] = 2.0 / ((1.0 - x * x) * pp * pp);
    }
  }
};

const GaussLegendre32& gl32() {
  static const GaussLegendre32 g;
  return g;
}

// Composite Gauss-Legendre with panel doubling until the value settles.
double integrate(const std::function<double(double)>& f, double lo, double hi,
                 double rel_tol = 1e-12) {
  double prev = 0.0;
  for (int panels = 1; panels <= 256; panels *= 2) {
    double acc = 0.0;
    const double h = (hi - lo) / panels;
    for (int p = 0; p < panels; ++p) {
      const double a = lo + p * h;
      for (int i = 0; i < 32; ++i) {
        acc += 0.5 * h * gl32().weight[i] * f(a + 0.5 * h * (gl32().node[i] + 1.0));
      }
    }
    if (panels > 1 && std::abs(acc - prev) <= rel_tol * (1.0 + std::abs(acc))) return acc;
    prev = acc;
  }
  return prev;
}

}  // namespace

SpectralLaw SpectralLaw::empirical(Eigen::VectorXd eigs) {
  if (eigs.size() == 0) throw ConfigError("SpectralLaw: empty eigenvalue list");
  if (eigs.minCoeff() < -1e-10 * std::max(1.0, std::abs(eigs.maxCoeff())))
    throw ConfigError("SpectralLaw: negative eigenvalue in empirical law");
  SpectralLaw law;
  law.kind_ = Kind::EmpiricalEigs;
  law.eigs_ = std::move(eigs);
  law.eigs_ = law.eigs_.cwiseMax(0.0);
  return law;
}

SpectralLaw SpectralLaw::point_mass(double value) {
  if (!(value > 0.0)) throw ConfigError("SpectralLaw: point mass must be > 0");
  SpectralLaw law;
  law.kind_ = Kind::PointMass;
  law.value_ = value;
  return law;
}

SpectralLaw SpectralLaw::shifted_arcsine(double center, double halfwidth) {
  return power_arcsine(center, halfwidth, 0.0);
}

SpectralLaw SpectralLaw::power_arcsine(double center, double halfwidth, double kappa) {
  if (!(halfwidth >= 0.0) || !(halfwidth < center))
    throw ConfigError("SpectralLaw: arcsine support must stay away from 0 (halfwidth < center)");
  SpectralLaw law;
  law.kind_ = kappa == 0.0 ? Kind::ShiftedArcsine : Kind::PowerTransformedArcsine;
  law.center_ = center;
  law.halfwidth_ = halfwidth;
  law.kappa_ = kappa;
  return law;
}

double SpectralLaw::quadrature(double v, bool squared) const {
  // Substituting x = center + halfwidth*sin(theta) removes the
  // inverse-square-root endpoint singularity of the arcsine density.
  auto f = [&](double theta) {
    const double base = center_ + halfwidth_ * std::sin(theta);
    const double t = std::pow(base, 1.0 - kappa_);
    const double den = 1.0 + v * t;
    return squared ? (t * t) / (den * den) : t / den;
  };
  return integrate(f, -kPi / 2.0, kPi / 2.0) / kPi;
}

double SpectralLaw::integral_resolvent(double v) const {
  switch (kind_) {
    case Kind::PointMass:
      return value_ / (1.0 + v * value_);
    case Kind::EmpiricalEigs: {
      double acc = 0.0;
      for (Eigen::Index i = 0; i < eigs_.size(); ++i) acc += eigs_[i] / (1.0 + v * eigs_[i]);
      return acc / static_cast<double>(eigs_.size());
    }
    default:
      return quadrature(v, false);
  }
}

double SpectralLaw::integral_resolvent_sq(double v) const {
  switch (kind_) {
    case Kind::PointMass: {
      const double d = 1.0 + v * value_;
      return value_ * value_ / (d * d);
    }
    case Kind::EmpiricalEigs: {
      double acc = 0.0;
      for (Eigen::Index i = 0; i < eigs_.size(); ++i) {
        const double d = 1.0 + v * eigs_[i];
        acc += eigs_[i] * eigs_[i] / (d * d);
      }
      return acc / static_cast<double>(eigs_.size());
    }
    default:
      return quadrature(v, true);
  }
}

std::pair<double, double> stieltjes_from_eigs(const Eigen::VectorXd& eigs, double lambda) {
  if (!(lambda > 0.0)) throw NonPositiveLambdaError("stieltjes_from_eigs: lambda must be > 0");
  if (eigs.size() == 0) throw ConfigError("stieltjes_from_eigs: empty eigenvalue list");
  double s = 0.0, sp = 0.0;
  for (Eigen::Index i = 0; i < eigs.size(); ++i) {
    const double d = eigs[i] + lambda;
    s += 1.0 / d;
    sp += 1.0 / (d * d);
  }
  const double inv_n = 1.0 / static_cast<double>(eigs.size());
  return {s * inv_n, sp * inv_n};
}

std::pair<double, double> silverstein_convert(double v, double v_prime, double lambda,
                                              double gamma) {
  const double zinv = -1.0 / lambda;
  const double zinv2 = 1.0 / (lambda * lambda);
  const double s = (v + zinv) / gamma - zinv;
  const double s_prime = (v_prime - zinv2) / gamma + zinv2;
  return {s, s_prime};
}

std::pair<double, double> silverstein_invert(double s, double s_prime, double lambda,
                                             double gamma) {
  const double zinv = -1.0 / lambda;
  const double zinv2 = 1.0 / (lambda * lambda);
  const double v = gamma * (s + zinv) - zinv;
  const double v_prime = gamma * (s_prime - zinv2) + zinv2;
  return {v, v_prime};
}

StieltjesEval fixed_point_stieltjes(const SpectralLaw& law, double gamma, double lambda,
                                    int max_iter, double tol) {
  if (!(lambda > 0.0)) throw NonPositiveLambdaError("fixed_point_stieltjes: lambda must be > 0");
  if (!(gamma > 0.0)) throw ConfigError("fixed_point_stieltjes: gamma must be > 0");
  double v = 0.0;
  double prev_delta = 0.0;
  double residual = 0.0;
  int it = 0;
  for (it = 1; it <= max_iter; ++it) {
    const double vn = 1.0 / (lambda + gamma * law.integral_resolvent(v));
    double delta = vn - v;
    residual = std::abs(delta);
    if (residual < tol) {
      v = vn;
      break;
    }
    // Damp if the update direction flips (oscillating iteration).
    if (delta * prev_delta < 0.0) {
      v = v + 0.5 * delta;
    } else {
      v = vn;
    }
    prev_delta = delta;
  }
  if (residual >= tol) {
    throw NoConvergenceError("fixed_point_stieltjes: residual " + std::to_string(residual) +
                                 " after " + std::to_string(max_iter) + " iterations",
                             residual, max_iter);
  }
  const double denom = 1.0 / (v * v) - gamma * law.integral_resolvent_sq(v);
  if (!(denom > 0.0))
    throw DegenerateDenominatorError("fixed_point_stieltjes: derivative identity degenerate");
  const double v_prime = 1.0 / denom;
  auto [s, s_prime] = silverstein_convert(v, v_prime, lambda, gamma);
  StieltjesEval eval;
  eval.s = s;
  eval.s_prime = s_prime;
  eval.v = v;
  eval.v_prime = v_prime;
  eval.lambda = lambda;
  eval.gamma = gamma;
  eval.iterations = it;
  eval.residual = residual;
  return eval;
}

double limiting_risk(const StieltjesEval& eval, double sigma2) {
  const double lambda = eval.lambda, gamma = eval.gamma;
  const double d = lambda * gamma * eval.s + (1.0 - gamma);
  const double n2 = lambda * lambda * gamma * eval.s_prime + (1.0 - gamma);
  if (std::abs(d) < 1e-14)
    throw DegenerateDenominatorError("limiting_risk: lambda*gamma*s + (1-gamma) vanishes");
  return (sigma2 + (lambda / gamma - sigma2) * (d - n2) / d) / d;
}

namespace {

// Closed-form transform for a point-mass population spectrum at rho, and
// its z-derivative at z = -lambda.
double mp_transform(double lambda, double gamma, double rho) {
  const double a = rho - rho * gamma + lambda;
  const double s = std::sqrt(a * a + 4.0 * rho * gamma * lambda);
  return (-a + s) / (2.0 * rho * gamma * lambda);
}

double mp_transform_prime(double lambda, double gamma, double rho) {
  const double a = rho - rho * gamma + lambda;
  const double s = std::sqrt(a * a + 4.0 * rho * gamma * lambda);
  const double ds = (a + 2.0 * rho * gamma) / s;
  const double num = (-1.0 + ds) * (2.0 * rho * gamma * lambda) - (-a + s) * (2.0 * rho * gamma);
  const double dm_dlambda = num / ((2.0 * rho * gamma * lambda) * (2.0 * rho * gamma * lambda));
  return -dm_dlambda;  // derivative in z at z = -lambda
}

}  // namespace

double mp_law_risk(double lambda, double gamma, double sigma2, double rho) {
  if (!(lambda > 0.0)) throw NonPositiveLambdaError("mp_law_risk: lambda must be > 0");
  if (!(gamma > 0.0) || !(rho > 0.0)) throw ConfigError("mp_law_risk: gamma, rho must be > 0");
  const double m = mp_transform(lambda, gamma, rho);
  const double mp = mp_transform_prime(lambda, gamma, rho);
  return sigma2 + gamma * sigma2 * rho * m + lambda * (lambda - gamma * sigma2) * rho * mp;
}

double mp_optimal_risk(double gamma, double sigma2, double rho) {
  const double t = rho * (1.0 - gamma) / gamma + sigma2;
  return 0.5 * sigma2 + rho * (gamma - 1.0) / (2.0 * gamma) +
         0.5 * std::sqrt(t * t + 4.0 * rho * sigma2);
}

double optimal_lambda_asymptotic(double gamma, double sigma2) {
  if (!(gamma > 0.0) || !(sigma2 > 0.0))
    throw ConfigError("optimal_lambda_asymptotic: gamma, sigma2 must be > 0");
  return gamma * sigma2;
}

}  // namespace metaridge
