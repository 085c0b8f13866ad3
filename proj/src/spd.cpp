#include "metaridge/spd.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <string>

namespace metaridge {

namespace {

void check_square(const Eigen::MatrixXd& m, const char* what) {
  if (m.rows() != m.cols() || m.rows() < 1) {
    throw DimensionMismatchError(std::string(what) + ": expected a square matrix, got " +
                                 std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }
}

void check_symmetric(const Eigen::MatrixXd& m, const char* what) {
  const double scale = m.cwiseAbs().maxCoeff();
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (asym > kSymmetryTol * std::max(scale, 1e-300)) {
    throw NotSpdError(std::string(what) + ": matrix is not symmetric (max asymmetry " +
                      std::to_string(asym) + ")");
  }
}

void check_same_dim(Eigen::Index a, Eigen::Index b, const char* what) {
  if (a != b) {
    throw DimensionMismatchError(std::string(what) + ": dimensions " + std::to_string(a) +
                                 " and " + std::to_string(b) + " differ");
  }
}

}  // namespace

SpdMatrix::SpdMatrix(Eigen::MatrixXd m) : m_(std::move(m)) {
  check_square(m_, "SpdMatrix");
  check_symmetric(m_, "SpdMatrix");
  m_ = ((m_ + m_.transpose()) / 2.0).eval();
  Eigen::LLT<Eigen::MatrixXd> llt(m_);
  if (llt.info() != Eigen::Success) {
    throw NotSpdError("SpdMatrix: Cholesky factorization failed (matrix not positive definite)");
  }
  if (llt.rcond() < kRcondFloor) {
    throw NotSpdError("SpdMatrix: reciprocal condition estimate " +
                      std::to_string(llt.rcond()) + " below " + std::to_string(kRcondFloor));
  }
}

SpdMatrix SpdMatrix::identity(Eigen::Index p) {
  return SpdMatrix(Eigen::MatrixXd::Identity(p, p));
}

SymmetricMatrix::SymmetricMatrix(Eigen::MatrixXd m) : m_(std::move(m)) {
  check_square(m_, "SymmetricMatrix");
  check_symmetric(m_, "SymmetricMatrix");
  m_ = ((m_ + m_.transpose()) / 2.0).eval();
}

SymmetricMatrix SymmetricMatrix::zero(Eigen::Index p) {
  return SymmetricMatrix(Eigen::MatrixXd::Zero(p, p));
}

SymmetricMatrix symmetrize(const Eigen::MatrixXd& m) {
  check_square(m, "symmetrize");
  return SymmetricMatrix((m + m.transpose()) / 2.0);
}

namespace detail {

Eigen::MatrixXd sym_sqrt(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  if (es.info() != Eigen::Success) throw NotSpdError("sym_sqrt: eigendecomposition failed");
  if (es.eigenvalues().minCoeff() <= 0.0) {
    throw NotSpdError("sym_sqrt: nonpositive eigenvalue " +
                      std::to_string(es.eigenvalues().minCoeff()));
  }
  return es.eigenvectors() * es.eigenvalues().cwiseSqrt().asDiagonal() *
         es.eigenvectors().transpose();
}

Eigen::MatrixXd sym_pow(const Eigen::MatrixXd& m, double t) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  if (es.info() != Eigen::Success) throw NotSpdError("sym_pow: eigendecomposition failed");
  if (es.eigenvalues().minCoeff() <= 0.0) {
    throw NotSpdError("sym_pow: nonpositive eigenvalue " +
                      std::to_string(es.eigenvalues().minCoeff()));
  }
  Eigen::VectorXd d = es.eigenvalues();
  for (Eigen::Index i = 0; i < d.size(); ++i) d[i] = std::pow(d[i], t);
  return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
}

Eigen::MatrixXd retract2_raw(const Eigen::MatrixXd& q, const Eigen::MatrixXd& xi) {
  Eigen::LLT<Eigen::MatrixXd> llt(q);
  if (llt.info() != Eigen::Success) throw NotSpdError("retraction: base point not positive definite");
  Eigen::MatrixXd out = q + xi + 0.5 * xi * llt.solve(xi);
  return ((out + out.transpose()) / 2.0).eval();
}

double min_eigenvalue(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

Eigen::MatrixXd eigen_floor(const Eigen::MatrixXd& m, double floor) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  Eigen::VectorXd d = es.eigenvalues().cwiseMax(floor);
  return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
}

bool cholesky_ok(const Eigen::MatrixXd& m) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  return llt.info() == Eigen::Success;
}

}  // namespace detail

SpdMatrix spd_sqrt(const SpdMatrix& q) {
  return SpdMatrix(detail::sym_sqrt(q.mat()));
}

SpdMatrix spd_pow(const SpdMatrix& q, double t) {
  return SpdMatrix(detail::sym_pow(q.mat(), t));
}

SpdMatrix retract_second_order(const SpdMatrix& q, const SymmetricMatrix& xi) {
  check_same_dim(q.dim(), xi.dim(), "retract_second_order");
  return SpdMatrix(detail::retract2_raw(q.mat(), xi.mat()));
}

SpdMatrix retract_exp(const SpdMatrix& q, const SymmetricMatrix& xi) {
  check_same_dim(q.dim(), xi.dim(), "retract_exp");
  const Eigen::MatrixXd qh = detail::sym_sqrt(q.mat());
  const Eigen::MatrixXd qmh = detail::sym_pow(q.mat(), -0.5);
  const Eigen::MatrixXd inner = ((qmh * xi.mat() * qmh +
                                  (qmh * xi.mat() * qmh).transpose()) / 2.0).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(inner);
  Eigen::VectorXd d = es.eigenvalues().array().exp();
  Eigen::MatrixXd e = es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
  Eigen::MatrixXd out = qh * e * qh;
  return SpdMatrix((out + out.transpose()) / 2.0);
}

double affine_metric(const SpdMatrix& q, const SymmetricMatrix& a, const SymmetricMatrix& b) {
  check_same_dim(q.dim(), a.dim(), "affine_metric");
  check_same_dim(q.dim(), b.dim(), "affine_metric");
  Eigen::LLT<Eigen::MatrixXd> llt(q.mat());
  if (llt.info() != Eigen::Success) throw NotSpdError("affine_metric: base point not positive definite");
  const Eigen::MatrixXd qa = llt.solve(a.mat());
  const Eigen::MatrixXd qb = llt.solve(b.mat());
  return (qa * qb).trace();
}

SpdMatrix geodesic(const SpdMatrix& a, const SpdMatrix& b, double t) {
  check_same_dim(a.dim(), b.dim(), "geodesic");
  const Eigen::MatrixXd ah = detail::sym_sqrt(a.mat());
  const Eigen::MatrixXd amh = detail::sym_pow(a.mat(), -0.5);
  Eigen::MatrixXd mid = amh * b.mat() * amh;
  mid = ((mid + mid.transpose()) / 2.0).eval();
  Eigen::MatrixXd out = ah * detail::sym_pow(mid, t) * ah;
  return SpdMatrix((out + out.transpose()) / 2.0);
}

}  // namespace metaridge
