#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <cmath>
#include <numbers>

#include "sdcm/kernel.hpp"
#include "sdcm/model.hpp"

namespace sdcm {

struct LikelihoodOptions {
  // Evaluate on the centered residuals u - mu*1 (consistent with the model's
  // stated distribution). The raw, uncentered form is kept for comparison.
  bool centered = true;
};

namespace detail {

inline Eigen::VectorXd residual(const PreparedDataset& d, const LikelihoodOptions& opts) {
  return opts.centered ? d.centered() : d.u;
}

inline Eigen::MatrixXd noisy_kernel(const PreparedDataset& d, const Hyperparameters& theta) {
  Eigen::MatrixXd s = kernel_matrix(d.sqdist, theta.delta, theta.sigma);
  s.diagonal().array() += theta.sigma_u_tilde * theta.sigma_u_tilde;
  return s;
}

}  // namespace detail

/// log p(u | Z, theta) = -1/2 (r' Sigma11^{-1} r + log|Sigma11| + N log 2pi),
/// with the log-determinant taken from the Cholesky factor.
inline double log_marginal_likelihood(const PreparedDataset& d, const Hyperparameters& theta,
                                      const LikelihoodOptions& opts = {}) {
  validate(theta);
  const SpdFactor f = factorize_spd(detail::noisy_kernel(d, theta));
  const Eigen::VectorXd r = detail::residual(d, opts);
  const double quad = r.dot(f.llt.solve(r));
  const double n = static_cast<double>(d.size());
  return -0.5 * (quad + log_det_from_factor(f.llt) + n * std::log(2.0 * std::numbers::pi));
}

/// Likelihood value together with its gradient in (log delta, log sigma,
/// log sigma_u) space. The log parameterization keeps all three positive and
/// copes with the many-decade search ranges.
struct LikelihoodEval {
  double value = 0.0;
  Eigen::Vector3d grad = Eigen::Vector3d::Zero();
};

/// One shared Cholesky serves the value, the quadratic form and the trace
/// terms:  dL/dtheta_j = 1/2 (a' dSigma a - tr(Sigma^{-1} dSigma)), a = Sigma^{-1} r.
inline LikelihoodEval likelihood_with_gradient(const PreparedDataset& d,
                                               const Hyperparameters& theta,
                                               const LikelihoodOptions& opts = {}) {
  validate(theta);
  const Eigen::MatrixXd kern = kernel_matrix(d.sqdist, theta.delta, theta.sigma);
  Eigen::MatrixXd sigma11 = kern;
  const double noise_var = theta.sigma_u_tilde * theta.sigma_u_tilde;
  sigma11.diagonal().array() += noise_var;
  const SpdFactor f = factorize_spd(sigma11);

  const Eigen::VectorXd r = detail::residual(d, opts);
  const Eigen::VectorXd a = f.llt.solve(r);
  const double n = static_cast<double>(d.size());

  LikelihoodEval out;
  out.value =
      -0.5 * (r.dot(a) + log_det_from_factor(f.llt) + n * std::log(2.0 * std::numbers::pi));

  const Eigen::MatrixXd inv =
      f.llt.solve(Eigen::MatrixXd::Identity(d.size(), d.size()));

  // dSigma/dlog(delta) = K .* sqdist / delta^2
  const Eigen::MatrixXd dk_ldelta =
      (kern.array() * d.sqdist.array() / (theta.delta * theta.delta)).matrix();
  out.grad[0] = 0.5 * (a.dot(dk_ldelta * a) - (inv.array() * dk_ldelta.array()).sum());
  // dSigma/dlog(sigma) = 2 K
  out.grad[1] = a.dot(kern * a) - (inv.array() * kern.array()).sum();
  // dSigma/dlog(sigma_u) = 2 sigma_u^2 I
  out.grad[2] = noise_var * (a.squaredNorm() - inv.trace());
  return out;
}

inline Eigen::Vector3d likelihood_gradient(const PreparedDataset& d, const Hyperparameters& theta,
                                           const LikelihoodOptions& opts = {}) {
  return likelihood_with_gradient(d, theta, opts).grad;
}

}  // namespace sdcm
