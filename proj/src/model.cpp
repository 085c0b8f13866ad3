#include "metaridge/model.hpp"

#include <Eigen/QR>

#include <cmath>
#include <string>

namespace metaridge {

std::uint64_t Rng::mix(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 over the (seed, stream) pair.
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Eigen::MatrixXd Rng::normal_matrix(Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> d(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = d(engine_);
  return m;
}

Eigen::VectorXd Rng::normal_vector(Eigen::Index n) {
  std::normal_distribution<double> d(0.0, 1.0);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = d(engine_);
  return v;
}

SpdMatrix build_tridiagonal(int p, double a, double b) {
  if (p < 1) throw DimensionMismatchError("build_tridiagonal: p must be >= 1");
  if (!(a > 2.0 * std::abs(b))) {
    throw NotSpdError("build_tridiagonal: requires a > 2|b| (got a=" + std::to_string(a) +
                      ", b=" + std::to_string(b) + ")");
  }
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(p, p);
  m.diagonal().setConstant(a);
  if (p > 1) {
    m.diagonal(1).setConstant(b);
    m.diagonal(-1).setConstant(b);
  }
  return SpdMatrix(std::move(m));
}

SpdMatrix build_power_law(int p, double exponent, std::uint64_t basis_seed) {
  if (p < 1) throw DimensionMismatchError("build_power_law: p must be >= 1");
  if (exponent < 0.0) throw ConfigError("build_power_law: exponent must be >= 0");
  Rng rng(basis_seed);
  Eigen::MatrixXd g = rng.normal_matrix(p, p);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ();
  Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  // Fix signs so the basis is Haar-distributed and seed-stable.
  for (int j = 0; j < p; ++j)
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  Eigen::VectorXd d(p);
  for (int j = 0; j < p; ++j) d[j] = std::pow(static_cast<double>(j + 1), -exponent);
  Eigen::MatrixXd m = q * d.asDiagonal() * q.transpose();
  return SpdMatrix((m + m.transpose()) / 2.0);
}

SpdMatrix realize_omega(const OmegaSpec& spec, int p) {
  switch (spec.kind) {
    case OmegaSpec::Kind::Tridiagonal:
      return build_tridiagonal(p, spec.a, spec.b);
    case OmegaSpec::Kind::Identity:
      return SpdMatrix::identity(p);
    case OmegaSpec::Kind::PowerLawEigen:
      return build_power_law(p, spec.exponent, spec.basis_seed);
    case OmegaSpec::Kind::Explicit:
      if (!spec.explicit_matrix) throw ConfigError("realize_omega: explicit matrix missing");
      if (spec.explicit_matrix->dim() != p)
        throw DimensionMismatchError("realize_omega: explicit matrix has wrong dimension");
      return *spec.explicit_matrix;
  }
  throw ConfigError("realize_omega: unknown kind");
}

SpdMatrix realize_sigma(const SigmaSpec& spec, const SpdMatrix& omega) {
  const Eigen::Index p = omega.dim();
  switch (spec.kind) {
    case SigmaSpec::Kind::Identity:
      return SpdMatrix::identity(p);
    case SigmaSpec::Kind::ScaledInverseOmega: {
      if (!(spec.rho > 0.0)) throw ConfigError("realize_sigma: rho must be > 0");
      return SpdMatrix(spec.rho * spd_pow(omega, -1.0).mat());
    }
    case SigmaSpec::Kind::PowerOfOmega:
      return spd_pow(omega, -spec.kappa);
    case SigmaSpec::Kind::BlockDiag: {
      if (!(spec.c > 0.0) || !(spec.d > 0.0))
        throw ConfigError("realize_sigma: block entries must be > 0");
      Eigen::VectorXd diag = Eigen::VectorXd::Constant(p, spec.d);
      diag[0] = spec.c;
      return SpdMatrix(Eigen::MatrixXd(diag.asDiagonal()));
    }
    case SigmaSpec::Kind::Explicit:
      if (!spec.explicit_matrix) throw ConfigError("realize_sigma: explicit matrix missing");
      if (spec.explicit_matrix->dim() != p)
        throw DimensionMismatchError("realize_sigma: explicit matrix has wrong dimension");
      return *spec.explicit_matrix;
  }
  throw ConfigError("realize_sigma: unknown kind");
}

namespace {

Eigen::MatrixXd entry_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng, EntryLaw law) {
  if (law == EntryLaw::Gaussian) return rng.normal_matrix(rows, cols);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.uniform() < 0.5 ? -1.0 : 1.0;
  return m;
}

Task sample_task_impl(const SpdMatrix& omega_half, const Eigen::MatrixXd& sigma_half,
                      double sigma2, int n, Rng& rng, EntryLaw law) {
  const Eigen::Index p = omega_half.dim();
  Task t;
  Eigen::MatrixXd z = entry_matrix(n, p, rng, law);
  t.x = z * sigma_half;
  const double scale = 1.0 / std::sqrt(static_cast<double>(p));
  Eigen::VectorXd beta = scale * (omega_half.mat() * rng.normal_vector(p));
  Eigen::VectorXd eps = std::sqrt(sigma2) * rng.normal_vector(n);
  t.y = t.x * beta + eps;
  t.beta_true = std::move(beta);
  return t;
}

}  // namespace

Task sample_task(const SpdMatrix& omega, const SpdMatrix& sigma, double sigma2,
                 int n, Rng& rng, EntryLaw law) {
  if (omega.dim() != sigma.dim())
    throw DimensionMismatchError("sample_task: omega and sigma dimensions differ");
  if (n < 1) throw DimensionMismatchError("sample_task: n must be >= 1");
  if (sigma2 < 0.0) throw ConfigError("sample_task: sigma2 must be >= 0");
  return sample_task_impl(spd_sqrt(omega), spd_sqrt(sigma).mat(), sigma2, n, rng, law);
}

MetaDataset sample_meta_dataset(const std::vector<int>& n_schedule, const SpdMatrix& omega,
                                const SigmaSpec& sigma_spec, double sigma2, Rng& rng,
                                EntryLaw law) {
  MetaDataset data;
  data.sigma2 = sigma2;
  data.omega_true = omega;
  const SpdMatrix omega_half = spd_sqrt(omega);
  const SpdMatrix sigma = realize_sigma(sigma_spec, omega);
  const Eigen::MatrixXd sigma_half = spd_sqrt(sigma).mat();
  data.tasks.reserve(n_schedule.size());
  for (int n : n_schedule) {
    data.tasks.push_back(sample_task_impl(omega_half, sigma_half, sigma2, n, rng, law));
  }
  return data;
}

SymmetricMatrix sample_covariance(const Eigen::MatrixXd& x) {
  if (x.rows() < 1) throw DimensionMismatchError("sample_covariance: empty design");
  Eigen::MatrixXd c = x.transpose() * x / static_cast<double>(x.rows());
  return SymmetricMatrix((c + c.transpose()) / 2.0);
}

}  // namespace metaridge
