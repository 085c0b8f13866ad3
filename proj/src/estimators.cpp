#include "metaridge/estimators.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <utility>

namespace metaridge {

RidgeFit generalized_ridge(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double lambda,
                           const SpdMatrix& weight, std::string weight_label) {
  const Eigen::Index n = x.rows(), p = x.cols();
  if (y.size() != n) throw DimensionMismatchError("generalized_ridge: X and y row counts differ");
  if (weight.dim() != p)
    throw DimensionMismatchError("generalized_ridge: weight dimension differs from X columns");
  if (lambda < 0.0) throw NonPositiveLambdaError("generalized_ridge: lambda must be >= 0");

  RidgeFit fit;
  fit.lambda = lambda;
  fit.weight_label = std::move(weight_label);
  const Eigen::VectorXd rhs = x.transpose() * y;
  if (lambda == 0.0) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
    if (qr.rank() < p)
      throw SingularError("generalized_ridge: lambda = 0 requires a full-column-rank design");
    fit.beta = qr.solve(y);
    return fit;
  }
  const Eigen::MatrixXd winv = detail::sym_pow(weight.mat(), -1.0);
  Eigen::MatrixXd system = x.transpose() * x + (static_cast<double>(n) * lambda) * winv;
  system = ((system + system.transpose()) / 2.0).eval();
  Eigen::LLT<Eigen::MatrixXd> llt(system);
  if (llt.info() != Eigen::Success)
    throw NotSpdError("generalized_ridge: normal equations not positive definite");
  fit.beta = llt.solve(rhs);
  // One step of iterative refinement keeps the relative residual at
  // round-off level.
  fit.beta += llt.solve(rhs - system * fit.beta);
  return fit;
}

// ---------------------------------------------------------------------------
// Moment-matching problem

MomProblem MomProblem::from_dataset(const MetaDataset& data,
                                    std::optional<double> sigma2_override) {
  if (data.tasks.empty()) throw ConfigError("MomProblem: dataset has no tasks");
  MomProblem prob;
  prob.p_ = data.p();
  prob.sigma2_ = sigma2_override.value_or(data.sigma2);
  prob.g0_ = Eigen::MatrixXd::Zero(prob.p_, prob.p_);
  prob.cs_.reserve(data.tasks.size());
  const double sigma2 = prob.sigma2_;
  for (const Task& t : data.tasks) {
    if (t.p() != prob.p_) throw DimensionMismatchError("MomProblem: tasks disagree on p");
    const Eigen::VectorXd b = t.x.transpose() * t.y;
    const Eigen::MatrixXd c = t.x.transpose() * t.x;
    const double y2 = t.y.squaredNorm();
    prob.g0_ += b * b.transpose() - sigma2 * c;
    prob.const_term_ += y2 * y2 - 2.0 * sigma2 * y2 +
                        static_cast<double>(t.n()) * sigma2 * sigma2;
    prob.cs_.push_back(c);
  }
  const double inv_l = 1.0 / static_cast<double>(data.tasks.size());
  prob.g0_ *= inv_l;
  prob.g0_ = ((prob.g0_ + prob.g0_.transpose()) / 2.0).eval();
  prob.const_term_ *= inv_l;
  return prob;
}

MomProblem MomProblem::from_moments(const std::vector<Eigen::MatrixXd>& designs,
                                    const std::vector<Eigen::MatrixXd>& moments,
                                    double sigma2) {
  if (designs.empty() || designs.size() != moments.size())
    throw ConfigError("MomProblem: designs and moments must be non-empty and aligned");
  MomProblem prob;
  prob.p_ = designs.front().cols();
  prob.sigma2_ = sigma2;
  prob.g0_ = Eigen::MatrixXd::Zero(prob.p_, prob.p_);
  for (std::size_t l = 0; l < designs.size(); ++l) {
    const Eigen::MatrixXd& x = designs[l];
    if (x.cols() != prob.p_) throw DimensionMismatchError("MomProblem: designs disagree on p");
    if (moments[l].rows() != x.rows() || moments[l].cols() != x.rows())
      throw DimensionMismatchError("MomProblem: moment matrix shape differs from n x n");
    const Eigen::MatrixXd r0 =
        moments[l] - sigma2 * Eigen::MatrixXd::Identity(x.rows(), x.rows());
    prob.g0_ += x.transpose() * r0 * x;
    prob.const_term_ += r0.squaredNorm();
    prob.cs_.push_back(x.transpose() * x);
  }
  const double inv_l = 1.0 / static_cast<double>(designs.size());
  prob.g0_ *= inv_l;
  prob.g0_ = ((prob.g0_ + prob.g0_.transpose()) / 2.0).eval();
  prob.const_term_ *= inv_l;
  return prob;
}

double MomProblem::value_and_gradient(const Eigen::MatrixXd& omega,
                                      Eigen::MatrixXd* grad) const {
  if (omega.rows() != p_ || omega.cols() != p_)
    throw DimensionMismatchError("MomProblem: omega has wrong dimension");
  const double pd = static_cast<double>(p_);
  const double inv_l = 1.0 / static_cast<double>(cs_.size());
  double quad = 0.0;
  Eigen::MatrixXd coc = Eigen::MatrixXd::Zero(p_, p_);
  Eigen::MatrixXd t(p_, p_);
  for (const Eigen::MatrixXd& c : cs_) {
    t.noalias() = c * omega;
    quad += t.cwiseProduct(t.transpose()).sum();  // tr(Omega C Omega C)
    if (grad) coc.noalias() += t * c;
  }
  quad *= inv_l / (pd * pd);
  const double value = const_term_ - 2.0 / pd * g0_.cwiseProduct(omega).sum() + quad;
  if (grad) {
    coc *= inv_l / pd;
    *grad = -(2.0 / pd) * (g0_ - coc);
    *grad = ((*grad + grad->transpose()) / 2.0).eval();
  }
  return value;
}

double MomProblem::objective(const Eigen::MatrixXd& omega) const {
  return value_and_gradient(omega, nullptr);
}

Eigen::MatrixXd MomProblem::gradient(const Eigen::MatrixXd& omega) const {
  Eigen::MatrixXd g;
  value_and_gradient(omega, &g);
  return g;
}

double MomProblem::smooth_bound() const {
  const double pd = static_cast<double>(p_);
  const double scale = 2.0 / (pd * pd * static_cast<double>(cs_.size()));
  Eigen::MatrixXd xi = Eigen::MatrixXd::Identity(p_, p_) / std::sqrt(pd);
  double nrm = 0.0, prev = -1.0;
  for (int it = 0; it < 60; ++it) {
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(p_, p_);
    for (const Eigen::MatrixXd& c : cs_) h.noalias() += c * xi * c;
    h *= scale;
    nrm = h.norm();
    if (nrm <= 0.0) return 1.0;
    xi = h / nrm;
    if (prev > 0.0 && std::abs(nrm - prev) < 1e-8 * nrm) break;
    prev = nrm;
  }
  return nrm;
}

double mom_objective(const SpdMatrix& omega, const MetaDataset& data) {
  return MomProblem::from_dataset(data).objective(omega.mat());
}

SymmetricMatrix mom_gradient(const SpdMatrix& omega, const MetaDataset& data) {
  return SymmetricMatrix(MomProblem::from_dataset(data).gradient(omega.mat()));
}

double l1_objective(const SpdMatrix& omega, const MetaDataset& data, double lambda_tilde) {
  if (lambda_tilde < 0.0) throw ConfigError("l1_objective: lambda_tilde must be >= 0");
  const Eigen::MatrixXd& m = omega.mat();
  double penalty = m.cwiseAbs().sum() - m.diagonal().cwiseAbs().sum();
  return mom_objective(omega, data) + lambda_tilde * penalty;
}

// ---------------------------------------------------------------------------
// Shared descent drivers

namespace {

using ValueGradFn = std::function<double(const Eigen::MatrixXd&, Eigen::MatrixXd*)>;

FitReport rgd_minimize(const ValueGradFn& vag, const Eigen::MatrixXd& init, double step,
                       int max_iter, double grad_tol) {
  Eigen::MatrixXd omega = init;
  Eigen::MatrixXd grad;
  double f = vag(omega, &grad);
  std::vector<double> trace{f};
  int it = 0;
  bool converged = false;
  for (it = 1; it <= max_iter; ++it) {
    const double gn = grad.norm();
    if (gn < grad_tol) {
      converged = true;
      --it;
      break;
    }
    Eigen::LLT<Eigen::MatrixXd> llt(omega);
    if (llt.info() != Eigen::Success)
      throw NotSpdError("rgd: iterate lost positive definiteness");
    // Retraction of -alpha*grad: omega - alpha*grad + (alpha^2/2) grad W,
    // with W = omega^{-1} grad shared across the backtracking trials.
    const Eigen::MatrixXd w = llt.solve(grad);
    const Eigen::MatrixXd curv = ((grad * w + (grad * w).transpose()) / 2.0).eval();
    double alpha = step;
    bool accepted = false;
    double fc = f;
    Eigen::MatrixXd cand;
    for (int h = 0; h < 50; ++h) {
      cand = omega - alpha * grad + (0.5 * alpha * alpha) * curv;
      cand = ((cand + cand.transpose()) / 2.0).eval();
      if (detail::cholesky_ok(cand)) {
        fc = vag(cand, nullptr);
        if (std::isfinite(fc) && fc <= f) {
          accepted = true;
          break;
        }
      }
      alpha *= 0.5;
    }
    if (!accepted)
      throw StepFailureError("rgd: backtracking exhausted 50 halvings without decrease");
    const bool stalled = (fc == f);
    omega = cand;
    f = vag(omega, &grad);
    trace.push_back(f);
    if (stalled) break;  // objective cannot be reduced further in double precision
  }
  FitReport report{SpdMatrix(omega), std::min(it, max_iter), grad.norm(), std::move(trace),
                   converged};
  return report;
}

double off_diag_l1(const Eigen::MatrixXd& m) {
  return m.cwiseAbs().sum() - m.diagonal().cwiseAbs().sum();
}

void soft_threshold_off_diag(Eigen::MatrixXd& m, double threshold) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (i == j) continue;
      const double v = m(i, j);
      m(i, j) = std::abs(v) > threshold ? v - threshold * (v > 0 ? 1.0 : -1.0) : 0.0;
    }
  }
}

FitReport prox_rgd_minimize(const ValueGradFn& vag, const Eigen::MatrixXd& init,
                            double smooth_bound, double lambda_tilde, int max_iter,
                            double decrease_tol, double eig_floor, bool unit_diag) {
  Eigen::MatrixXd omega = init;
  Eigen::MatrixXd grad;
  double f = vag(omega, &grad);
  double h = f + lambda_tilde * off_diag_l1(omega);
  std::vector<double> trace{h};
  int it = 0;
  bool converged = false;
  for (it = 1; it <= max_iter; ++it) {
    Eigen::LLT<Eigen::MatrixXd> llt(omega);
    if (llt.info() != Eigen::Success)
      throw NotSpdError("prox rgd: iterate lost positive definiteness");
    double lt = smooth_bound;
    bool accepted = false;
    double hc = h;
    Eigen::MatrixXd cand;
    for (int trial = 0; trial < 50; ++trial, lt *= 2.0) {
      Eigen::MatrixXd target = omega - grad / lt;
      soft_threshold_off_diag(target, lambda_tilde / (2.0 * lt));
      if (unit_diag) target.diagonal().setOnes();
      target = ((target + target.transpose()) / 2.0).eval();
      const Eigen::MatrixXd eta = target - omega;
      cand = omega + eta + 0.5 * eta * llt.solve(eta);
      cand = ((cand + cand.transpose()) / 2.0).eval();
      if (unit_diag) cand.diagonal().setOnes();
      if (detail::min_eigenvalue(cand) < eig_floor) {
        cand = detail::eigen_floor(cand, eig_floor);
        if (unit_diag) cand.diagonal().setOnes();
      }
      if (!detail::cholesky_ok(cand)) continue;
      const double fc = vag(cand, nullptr);
      hc = fc + lambda_tilde * off_diag_l1(cand);
      if (std::isfinite(hc) && hc <= h) {
        accepted = true;
        break;
      }
    }
    if (!accepted)
      throw StepFailureError("prox rgd: backtracking exhausted 50 halvings without decrease");
    const double decrease = h - hc;
    omega = cand;
    h = hc;
    f = vag(omega, &grad);
    trace.push_back(h);
    if (decrease < decrease_tol) {
      converged = true;
      break;
    }
  }
  FitReport report{SpdMatrix(omega), std::min(it, max_iter), grad.norm(), std::move(trace),
                   converged};
  return report;
}

Eigen::MatrixXd init_or_identity(const FitOptions& opts, Eigen::Index p) {
  if (opts.init) {
    if (opts.init->dim() != p)
      throw DimensionMismatchError("fit: init dimension differs from problem dimension");
    return opts.init->mat();
  }
  return Eigen::MatrixXd::Identity(p, p);
}

}  // namespace

FitReport fit_mom_rgd(const MomProblem& problem, const FitOptions& opts) {
  const double bound = opts.smooth_bound > 0.0 ? opts.smooth_bound : problem.smooth_bound();
  const double step = opts.step > 0.0 ? opts.step : 1.0 / bound;
  auto vag = [&problem](const Eigen::MatrixXd& omega, Eigen::MatrixXd* grad) {
    return problem.value_and_gradient(omega, grad);
  };
  return rgd_minimize(vag, init_or_identity(opts, problem.dim()), step, opts.max_iter,
                      opts.grad_tol);
}

FitReport fit_mom_rgd(const MetaDataset& data, const FitOptions& opts) {
  return fit_mom_rgd(MomProblem::from_dataset(data), opts);
}

FitReport fit_l1_prox_rgd(const MomProblem& problem, const FitOptions& opts) {
  if (opts.lambda_tilde < 0.0) throw ConfigError("fit_l1_prox_rgd: lambda_tilde must be >= 0");
  const double bound = opts.smooth_bound > 0.0 ? opts.smooth_bound : problem.smooth_bound();
  auto vag = [&problem](const Eigen::MatrixXd& omega, Eigen::MatrixXd* grad) {
    return problem.value_and_gradient(omega, grad);
  };
  return prox_rgd_minimize(vag, init_or_identity(opts, problem.dim()), bound,
                           opts.lambda_tilde, opts.max_iter, opts.grad_tol, opts.eig_floor,
                           /*unit_diag=*/false);
}

FitReport fit_l1_prox_rgd(const MetaDataset& data, const FitOptions& opts) {
  return fit_l1_prox_rgd(MomProblem::from_dataset(data), opts);
}

// ---------------------------------------------------------------------------
// Likelihood estimator

namespace {

double mle_value_and_gradient(const Eigen::MatrixXd& omega, double sigma2,
                              const MetaDataset& data, Eigen::MatrixXd* grad) {
  const Eigen::Index p = data.p();
  const double pd = static_cast<double>(p);
  double nll = 0.0;
  if (grad) grad->setZero(p, p);
  for (const Task& t : data.tasks) {
    const Eigen::Index n = t.n();
    Eigen::MatrixXd s = (t.x * omega * t.x.transpose()) / pd;
    s.diagonal().array() += sigma2;
    s = ((s + s.transpose()) / 2.0).eval();
    Eigen::LLT<Eigen::MatrixXd> llt(s);
    if (llt.info() != Eigen::Success)
      throw NotSpdError("mle: marginal covariance not positive definite");
    double logdet = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      logdet += 2.0 * std::log(llt.matrixLLT()(i, i));
    const Eigen::VectorXd a = llt.solve(t.y);
    nll += 0.5 * (logdet + t.y.dot(a));
    if (grad) {
      const Eigen::MatrixXd sinv = llt.solve(Eigen::MatrixXd::Identity(n, n));
      grad->noalias() +=
          t.x.transpose() * (sinv - a * a.transpose()) * t.x / (2.0 * pd);
    }
  }
  if (grad) *grad = ((*grad + grad->transpose()) / 2.0).eval();
  return nll;
}

}  // namespace

double mle_negloglik(const SpdMatrix& omega, double sigma2, const MetaDataset& data) {
  if (sigma2 < 0.0) throw ConfigError("mle_negloglik: sigma2 must be >= 0");
  return mle_value_and_gradient(omega.mat(), sigma2, data, nullptr);
}

SymmetricMatrix mle_gradient(const SpdMatrix& omega, double sigma2, const MetaDataset& data) {
  Eigen::MatrixXd g;
  mle_value_and_gradient(omega.mat(), sigma2, data, &g);
  return SymmetricMatrix(std::move(g));
}

FitReport fit_mle_rgd(const MetaDataset& data, double sigma2, const FitOptions& opts) {
  const double step = opts.step > 0.0 ? opts.step : 1.0;
  auto vag = [&data, sigma2](const Eigen::MatrixXd& omega, Eigen::MatrixXd* grad) {
    return mle_value_and_gradient(omega, sigma2, data, grad);
  };
  return rgd_minimize(vag, init_or_identity(opts, data.p()), step, opts.max_iter,
                      opts.grad_tol);
}

// ---------------------------------------------------------------------------
// Noise variance and correlation-based estimators

Sigma2Estimate dicker_sigma2(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                             const SpdMatrix& sigma_hat) {
  const Eigen::Index n = x.rows(), p = x.cols();
  if (y.size() != n) throw DimensionMismatchError("dicker_sigma2: X and y row counts differ");
  if (sigma_hat.dim() != p)
    throw DimensionMismatchError("dicker_sigma2: covariance dimension differs");
  const double nd = static_cast<double>(n), pd = static_cast<double>(p);
  const Eigen::VectorXd xty = x.transpose() * y;
  const Eigen::VectorXd whitened = detail::sym_pow(sigma_hat.mat(), -0.5) * xty;
  Sigma2Estimate est;
  est.value = (pd + nd + 1.0) / (nd * (nd + 1.0)) * y.squaredNorm() -
              whitened.squaredNorm() / (nd * (nd + 1.0));
  est.negative = est.value < 0.0;
  return est;
}

Eigen::VectorXd left_inverse_apply(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  if (y.size() != x.rows())
    throw DimensionMismatchError("left_inverse_apply: X and y row counts differ");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  if (qr.rank() < x.cols())
    throw SingularError("left_inverse_apply: design is not full column rank");
  return qr.solve(y);
}

SpdMatrix diag_weight(const std::vector<Task>& tasks) {
  if (tasks.empty()) throw ConfigError("diag_weight: no tasks");
  const Eigen::Index p = tasks.front().p();
  Eigen::VectorXd w = Eigen::VectorXd::Zero(p);
  for (const Task& t : tasks) {
    const Eigen::VectorXd z = left_inverse_apply(t.x, t.y);
    w += z.cwiseProduct(z);
  }
  w *= static_cast<double>(p) / static_cast<double>(tasks.size());
  if (w.minCoeff() <= 0.0)
    throw NotSpdError("diag_weight: nonpositive diagonal entry");
  return SpdMatrix(Eigen::MatrixXd(w.asDiagonal()));
}

CorrelationFit fit_correlation_fullrank(const std::vector<Task>& tasks, double lambda_tilde,
                                        double eig_floor) {
  if (lambda_tilde < 0.0) throw ConfigError("fit_correlation_fullrank: lambda_tilde >= 0");
  const SpdMatrix w = diag_weight(tasks);
  const Eigen::Index p = w.dim();
  const Eigen::VectorXd w_diag = w.mat().diagonal();
  const Eigen::VectorXd w_inv_half = w_diag.cwiseSqrt().cwiseInverse();
  Eigen::MatrixXd mbar = Eigen::MatrixXd::Zero(p, p);
  for (const Task& t : tasks) {
    const Eigen::VectorXd zn = w_inv_half.cwiseProduct(left_inverse_apply(t.x, t.y));
    mbar += zn * zn.transpose();
  }
  mbar /= static_cast<double>(tasks.size());
  Eigen::MatrixXd theta = static_cast<double>(p) * mbar;
  soft_threshold_off_diag(theta, lambda_tilde * static_cast<double>(p * p) / 2.0);
  theta.diagonal().setOnes();
  theta = ((theta + theta.transpose()) / 2.0).eval();
  if (detail::min_eigenvalue(theta) < eig_floor) {
    theta = detail::eigen_floor(theta, eig_floor);
  }
  const Eigen::VectorXd w_half = w_diag.cwiseSqrt();
  Eigen::MatrixXd omega = w_half.asDiagonal() * theta * w_half.asDiagonal();
  return CorrelationFit{SpdMatrix((omega + omega.transpose()) / 2.0), std::move(theta), w_diag};
}

CorrelationFit fit_correlation_split(const std::vector<Task>& tasks, int l0,
                                     double lambda_tilde, const FitOptions& opts) {
  if (l0 < 1 || static_cast<std::size_t>(l0) >= tasks.size())
    throw ConfigError("fit_correlation_split: need 1 <= l0 < L (nonempty remainder)");
  const std::vector<Task> head(tasks.begin(), tasks.begin() + l0);
  const SpdMatrix w = diag_weight(head);
  const Eigen::VectorXd w_diag = w.mat().diagonal();
  const Eigen::VectorXd w_half = w_diag.cwiseSqrt();

  std::vector<Eigen::MatrixXd> designs, moments;
  designs.reserve(tasks.size() - l0);
  moments.reserve(tasks.size() - l0);
  for (std::size_t l = static_cast<std::size_t>(l0); l < tasks.size(); ++l) {
    designs.push_back(tasks[l].x * w_half.asDiagonal());
    moments.push_back(tasks[l].y * tasks[l].y.transpose());
  }
  const MomProblem problem = MomProblem::from_moments(designs, moments, /*sigma2=*/0.0);
  const double bound = opts.smooth_bound > 0.0 ? opts.smooth_bound : problem.smooth_bound();
  auto vag = [&problem](const Eigen::MatrixXd& theta, Eigen::MatrixXd* grad) {
    return problem.value_and_gradient(theta, grad);
  };
  FitReport rep = prox_rgd_minimize(vag, init_or_identity(opts, problem.dim()), bound,
                                    lambda_tilde, opts.max_iter, opts.grad_tol,
                                    opts.eig_floor, /*unit_diag=*/true);
  Eigen::MatrixXd theta = rep.omega_hat.mat();
  Eigen::MatrixXd omega = w_half.asDiagonal() * theta * w_half.asDiagonal();
  return CorrelationFit{SpdMatrix((omega + omega.transpose()) / 2.0), std::move(theta), w_diag};
}

}  // namespace metaridge
