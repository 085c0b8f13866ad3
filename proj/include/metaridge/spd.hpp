#pragma once

#include <Eigen/Dense>

#include "metaridge/errors.hpp"

namespace metaridge {

// Relative tolerance for accepting a matrix as symmetric.
inline constexpr double kSymmetryTol = 1e-12;

// Reciprocal-condition cutoff below which a matrix is treated as not
// positive definite rather than silently regularized.
inline constexpr double kRcondFloor = 1e-12;

// Symmetric positive definite matrix. Construction validates symmetry
// (within kSymmetryTol, then projects onto the symmetric part), positive
// definiteness via Cholesky, and conditioning via the Cholesky rcond
// estimate. Immutable after construction.
class SpdMatrix {
 public:
  explicit SpdMatrix(Eigen::MatrixXd m);

  static SpdMatrix identity(Eigen::Index p);

  Eigen::Index dim() const { return m_.rows(); }
  const Eigen::MatrixXd& mat() const { return m_; }

 private:
  Eigen::MatrixXd m_;
};

// Symmetric (not necessarily definite) matrix; the tangent-vector type.
class SymmetricMatrix {
 public:
  explicit SymmetricMatrix(Eigen::MatrixXd m);

  static SymmetricMatrix zero(Eigen::Index p);

  Eigen::Index dim() const { return m_.rows(); }
  const Eigen::MatrixXd& mat() const { return m_; }

 private:
  Eigen::MatrixXd m_;
};

// (M + M^T)/2 for square M.
SymmetricMatrix symmetrize(const Eigen::MatrixXd& m);

// Symmetric square root via eigendecomposition; sqrt(Q)*sqrt(Q) = Q.
SpdMatrix spd_sqrt(const SpdMatrix& q);

// Q^t via eigendecomposition; t may be negative or fractional.
SpdMatrix spd_pow(const SpdMatrix& q, double t);

// Second-order retraction Q + Xi + (1/2) Xi Q^{-1} Xi. Positive definite
// for every symmetric Xi.
SpdMatrix retract_second_order(const SpdMatrix& q, const SymmetricMatrix& xi);

// Exponential-map retraction Q^{1/2} exp(Q^{-1/2} Xi Q^{-1/2}) Q^{1/2}.
SpdMatrix retract_exp(const SpdMatrix& q, const SymmetricMatrix& xi);

// Affine-invariant metric tr(A Q^{-1} B Q^{-1}) on the tangent space at Q.
double affine_metric(const SpdMatrix& q, const SymmetricMatrix& a,
                     const SymmetricMatrix& b);

// Geodesic A^{1/2} (A^{-1/2} B A^{-1/2})^t A^{1/2}; t in [0,1] joins A to B.
SpdMatrix geodesic(const SpdMatrix& a, const SpdMatrix& b, double t);

namespace detail {

// Validation-free building blocks shared by the optimizers; callers are
// responsible for symmetry of the inputs.
Eigen::MatrixXd sym_sqrt(const Eigen::MatrixXd& m);
Eigen::MatrixXd sym_pow(const Eigen::MatrixXd& m, double t);
Eigen::MatrixXd retract2_raw(const Eigen::MatrixXd& q, const Eigen::MatrixXd& xi);
double min_eigenvalue(const Eigen::MatrixXd& m);
// Clamp eigenvalues from below at floor.
Eigen::MatrixXd eigen_floor(const Eigen::MatrixXd& m, double floor);
bool cholesky_ok(const Eigen::MatrixXd& m);

}  // namespace detail

}  // namespace metaridge
