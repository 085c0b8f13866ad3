#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "metaridge/spd.hpp"

namespace metaridge {

// Deterministic RNG with a counter-based splitting scheme: streams derived
// from the same master seed and distinct stream ids are independent and
// stable when more streams are added later.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  static std::uint64_t mix(std::uint64_t seed, std::uint64_t stream);
  static Rng derive(std::uint64_t seed, std::uint64_t stream) {
    return Rng(mix(seed, stream));
  }

  double normal() {
    std::normal_distribution<double> d(0.0, 1.0);
    return d(engine_);
  }
  double uniform() {
    std::uniform_real_distribution<double> d(0.0, 1.0);
    return d(engine_);
  }
  std::mt19937_64& engine() { return engine_; }

  // Row-major matrix / vector of iid standard normals.
  Eigen::MatrixXd normal_matrix(Eigen::Index rows, Eigen::Index cols);
  Eigen::VectorXd normal_vector(Eigen::Index n);

 private:
  std::mt19937_64 engine_;
};

// Entry law for the whitened design matrix; Gaussian is the default,
// Rademacher (+-1) is a hook for robustness experiments.
enum class EntryLaw { Gaussian, Rademacher };

// Specification of the coefficient hyper-covariance.
struct OmegaSpec {
  enum class Kind { Tridiagonal, Identity, PowerLawEigen, Explicit };
  Kind kind = Kind::Identity;
  double a = 0.0;                 // Tridiagonal diagonal
  double b = 0.0;                 // Tridiagonal off-diagonal
  double exponent = 0.0;          // PowerLawEigen decay j^{-exponent}
  std::uint64_t basis_seed = 0;   // PowerLawEigen basis
  std::optional<SpdMatrix> explicit_matrix;

  static OmegaSpec tridiagonal(double a, double b) {
    OmegaSpec s; s.kind = Kind::Tridiagonal; s.a = a; s.b = b; return s;
  }
  static OmegaSpec identity() { return OmegaSpec{}; }
  static OmegaSpec power_law(double exponent, std::uint64_t basis_seed) {
    OmegaSpec s; s.kind = Kind::PowerLawEigen; s.exponent = exponent;
    s.basis_seed = basis_seed; return s;
  }
  static OmegaSpec explicit_spd(SpdMatrix m) {
    OmegaSpec s; s.kind = Kind::Explicit; s.explicit_matrix = std::move(m); return s;
  }
};

// Specification of a task design covariance, possibly tied to Omega.
struct SigmaSpec {
  enum class Kind { Identity, ScaledInverseOmega, PowerOfOmega, BlockDiag, Explicit };
  Kind kind = Kind::Identity;
  double rho = 1.0;    // ScaledInverseOmega: rho * Omega^{-1}
  double kappa = 0.0;  // PowerOfOmega: Omega^{-kappa}
  double c = 1.0;      // BlockDiag leading entry
  double d = 1.0;      // BlockDiag remaining entries
  std::optional<SpdMatrix> explicit_matrix;

  static SigmaSpec identity() { return SigmaSpec{}; }
  static SigmaSpec scaled_inverse_omega(double rho) {
    SigmaSpec s; s.kind = Kind::ScaledInverseOmega; s.rho = rho; return s;
  }
  static SigmaSpec power_of_omega(double kappa) {
    SigmaSpec s; s.kind = Kind::PowerOfOmega; s.kappa = kappa; return s;
  }
  static SigmaSpec block_diag(double c, double d) {
    SigmaSpec s; s.kind = Kind::BlockDiag; s.c = c; s.d = d; return s;
  }
  static SigmaSpec explicit_spd(SpdMatrix m) {
    SigmaSpec s; s.kind = Kind::Explicit; s.explicit_matrix = std::move(m); return s;
  }
};

// One regression task: design, response, and (when simulated) the
// ground-truth coefficient vector.
struct Task {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  std::optional<Eigen::VectorXd> beta_true;

  Eigen::Index n() const { return x.rows(); }
  Eigen::Index p() const { return x.cols(); }
};

// A collection of tasks sharing the coefficient distribution.
struct MetaDataset {
  std::vector<Task> tasks;
  std::optional<SpdMatrix> omega_true;
  double sigma2 = 0.0;

  Eigen::Index p() const { return tasks.empty() ? 0 : tasks.front().p(); }
};

// Tridiagonal matrix with `a` on the diagonal and `b` off it; eigenvalues
// are a + 2 b cos(k pi/(p+1)). Requires a > 2|b| for positive definiteness.
SpdMatrix build_tridiagonal(int p, double a, double b);

// SPD matrix with eigenvalues j^{-exponent} in a seeded Haar-random
// orthogonal basis (QR of a Gaussian matrix with sign-fixed R diagonal).
SpdMatrix build_power_law(int p, double exponent, std::uint64_t basis_seed);

SpdMatrix realize_omega(const OmegaSpec& spec, int p);
SpdMatrix realize_sigma(const SigmaSpec& spec, const SpdMatrix& omega);

// Draws one task: X = Z Sigma^{1/2} with iid entries of `law`,
// beta ~ N(0, Omega/p), eps ~ N(0, sigma2 I), y = X beta + eps.
Task sample_task(const SpdMatrix& omega, const SpdMatrix& sigma, double sigma2,
                 int n, Rng& rng, EntryLaw law = EntryLaw::Gaussian);

// L independent tasks with per-task sample sizes from n_schedule.
MetaDataset sample_meta_dataset(const std::vector<int>& n_schedule,
                                const SpdMatrix& omega, const SigmaSpec& sigma_spec,
                                double sigma2, Rng& rng,
                                EntryLaw law = EntryLaw::Gaussian);

// X^T X / n.
SymmetricMatrix sample_covariance(const Eigen::MatrixXd& x);

}  // namespace metaridge
