#pragma once

#include <Eigen/Core>
#include <cmath>

#include "sdcm/errors.hpp"

namespace sdcm {

/// Isotropic RBF kernel sigma^2 * exp(-||zi - zj||^2 / (2 delta^2)).
/// Inputs are expected in normalized feature units.
inline double kernel_eval(const Eigen::VectorXd& zi, const Eigen::VectorXd& zj, double delta,
                          double sigma) {
  if (zi.size() != zj.size()) throw invalid_input("kernel_eval: dimension mismatch");
  if (!(delta > 0.0) || !(sigma > 0.0))
    throw invalid_input("kernel_eval: delta and sigma must be positive");
  const double d2 = (zi - zj).squaredNorm();
  return sigma * sigma * std::exp(-d2 / (2.0 * delta * delta));
}

/// Pairwise squared euclidean distances between rows of Z. Computed with the
/// gram-matrix identity; tiny negative round-off is clamped at zero so the
/// kernel never exceeds sigma^2, and the lower triangle is mirrored so the
/// result is exactly symmetric.
inline Eigen::MatrixXd pairwise_sqdist(const Eigen::MatrixXd& Z) {
  const Eigen::VectorXd sq = Z.rowwise().squaredNorm();
  Eigen::MatrixXd d2 = sq.replicate(1, Z.rows());
  d2 += sq.transpose().replicate(Z.rows(), 1);
  d2.noalias() -= 2.0 * (Z * Z.transpose());
  d2 = d2.cwiseMax(0.0);
  d2.diagonal().setZero();
  d2.triangularView<Eigen::StrictlyUpper>() = d2.transpose();
  return d2;
}

/// Kernel matrix from precomputed squared distances. Mirrored after the
/// elementwise exp: SIMD and scalar lanes of vectorized exp can differ by an
/// ulp, and the matrix contract is exact symmetry.
inline Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& sqdist, double delta, double sigma) {
  if (!(delta > 0.0) || !(sigma > 0.0))
    throw invalid_input("kernel_matrix: delta and sigma must be positive");
  Eigen::MatrixXd k = (sigma * sigma) * (-sqdist / (2.0 * delta * delta)).array().exp().matrix();
  k.triangularView<Eigen::StrictlyUpper>() = k.transpose();
  return k;
}

/// Cross-covariance vector k(Z_i, z) for a single query row z.
inline Eigen::VectorXd kernel_cross(const Eigen::MatrixXd& Z, const Eigen::VectorXd& z,
                                    double delta, double sigma) {
  if (Z.cols() != z.size()) throw invalid_input("kernel_cross: dimension mismatch");
  const Eigen::VectorXd d2 =
      (Z.rowwise() - z.transpose()).rowwise().squaredNorm().cwiseMax(0.0);
  return (sigma * sigma) * (-d2 / (2.0 * delta * delta)).array().exp().matrix();
}

}  // namespace sdcm
