#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <utility>
#include <vector>

#include "sdcm/errors.hpp"
#include "sdcm/kernel.hpp"
#include "sdcm/types.hpp"

namespace sdcm {

/// Kernel length scale, kernel amplitude and reference-noise level, in
/// normalized feature / target units.
struct Hyperparameters {
  double delta = 1.0;
  double sigma = 1.0;
  double sigma_u_tilde = 1e-3;
};

inline void validate(const Hyperparameters& h) {
  if (!(h.delta > 0.0) || !(h.sigma > 0.0) || !(h.sigma_u_tilde > 0.0))
    throw invalid_input("Hyperparameters: all of delta, sigma, sigma_u_tilde must be positive");
}

/// How raw samples are mapped into the units the GP operates in. Feature
/// z-scoring is on by default: elapsed time and raw outputs differ by several
/// orders of magnitude while the kernel is isotropic, so unnormalized features
/// would make the distance all about the time coordinate. References are
/// divided by target_scale so the usual parameter ranges apply.
struct NormalizationConfig {
  bool normalize_features = true;
  double target_scale = 400.0;  // physical units mapped to 1.0
};

/// Per-dimension mean/std frozen at training time and applied to every query.
struct FeatureStats {
  Eigen::VectorXd mean;
  Eigen::VectorXd std;

  Eigen::VectorXd apply(const Eigen::VectorXd& z) const {
    return (z - mean).cwiseQuotient(std);
  }
};

inline FeatureStats compute_feature_stats(const Eigen::MatrixXd& Z) {
  FeatureStats s;
  s.mean = Z.colwise().mean();
  Eigen::VectorXd var =
      (Z.rowwise() - s.mean.transpose()).array().square().colwise().mean();
  s.std = var.cwiseSqrt();
  // constant dimensions pass through unscaled
  for (Eigen::Index d = 0; d < s.std.size(); ++d)
    if (s.std[d] < 1e-12) s.std[d] = 1.0;
  return s;
}

inline FeatureStats identity_stats(Eigen::Index dim) {
  FeatureStats s;
  s.mean = Eigen::VectorXd::Zero(dim);
  s.std = Eigen::VectorXd::Ones(dim);
  return s;
}

/// Normalized design matrix with cached pairwise distances. Shared by model
/// assembly and likelihood evaluation so the O(N^2 D) distance computation is
/// paid once per dataset rather than once per hyperparameter trial step.
struct PreparedDataset {
  Eigen::MatrixXd Z;       // N x D normalized features
  Eigen::VectorXd u;       // N normalized references
  double mu = 0.0;         // mean of u
  Eigen::MatrixXd sqdist;  // N x N pairwise ||zi - zj||^2
  FeatureStats stats;
  NormalizationConfig norm;

  Eigen::Index size() const { return Z.rows(); }
  Eigen::VectorXd centered() const { return u.array() - mu; }
};

/// Normalizes a sample list. When frozen stats are given (online updates keep
/// the feature space of the initial training), they are used instead of
/// recomputing from the data.
inline PreparedDataset prepare_dataset(const std::vector<CalibrationSample>& samples,
                                       const NormalizationConfig& norm,
                                       const std::optional<FeatureStats>& frozen = std::nullopt) {
  if (samples.empty()) throw invalid_input("prepare_dataset: empty dataset");
  if (!(norm.target_scale > 0.0))
    throw invalid_input("prepare_dataset: target_scale must be positive");
  const Eigen::Index dim = samples.front().z.size();
  Eigen::MatrixXd raw(static_cast<Eigen::Index>(samples.size()), dim);
  Eigen::VectorXd u(static_cast<Eigen::Index>(samples.size()));
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].z.size() != dim)
      throw invalid_input("prepare_dataset: inconsistent feature dimensions");
    raw.row(static_cast<Eigen::Index>(i)) = samples[i].z.transpose();
    u[static_cast<Eigen::Index>(i)] = samples[i].u / norm.target_scale;
  }
  PreparedDataset d;
  d.norm = norm;
  if (norm.normalize_features)
    d.stats = frozen ? *frozen : compute_feature_stats(raw);
  else
    d.stats = identity_stats(dim);
  d.Z = (raw.rowwise() - d.stats.mean.transpose()) * d.stats.std.cwiseInverse().asDiagonal();
  d.u = u;
  d.mu = u.mean();
  d.sqdist = pairwise_sqdist(d.Z);
  return d;
}

/// Cholesky of an SPD matrix with escalating diagonal jitter: first attempt
/// is jitter-free, then 1e-10 growing tenfold per retry up to 1e-4.
struct SpdFactor {
  Eigen::LLT<Eigen::MatrixXd> llt;
  double jitter = 0.0;
};

inline SpdFactor factorize_spd(const Eigen::MatrixXd& S) {
  constexpr double kFirstJitter = 1e-10;
  constexpr double kMaxJitter = 1e-4;
  SpdFactor f;
  f.llt.compute(S);
  if (f.llt.info() == Eigen::Success) return f;
  for (double j = kFirstJitter; j <= kMaxJitter * (1.0 + 1e-12); j *= 10.0) {
    Eigen::MatrixXd Sj = S;
    Sj.diagonal().array() += j;
    f.llt.compute(Sj);
    if (f.llt.info() == Eigen::Success) {
      f.jitter = j;
      return f;
    }
  }
  std::ostringstream msg;
  msg << "factorize_spd: Cholesky failed after jitter escalation to " << kMaxJitter
      << " (N=" << S.rows() << ", diag range [" << S.diagonal().minCoeff() << ", "
      << S.diagonal().maxCoeff() << "])";
  throw numerical_error(msg.str());
}

inline double log_det_from_factor(const Eigen::LLT<Eigen::MatrixXd>& llt) {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

/// Posterior summary for one query, in physical units except for the
/// confidence, which is 1/sqrt(normalized variance).
struct PosteriorEstimate {
  double mean = 0.0;
  double variance = 0.0;
  double confidence = 0.0;
  bool variance_clamped = false;  // set when round-off pushed variance slightly negative
};

/// Trained estimator: dataset, hyperparameters, prior mean and the cached
/// Cholesky factor of Sigma11. Immutable once assembled; concurrent predict
/// calls are safe.
struct SdcmModel {
  WindowSpec window;
  std::vector<CalibrationSample> dataset;
  Hyperparameters theta;
  NormalizationConfig norm;
  FeatureStats stats;
  double mu = 0.0;              // mean of normalized references
  Eigen::MatrixXd features;     // N x D normalized
  Eigen::VectorXd targets;      // N normalized references
  Eigen::LLT<Eigen::MatrixXd> sigma11_llt;
  Eigen::VectorXd alpha;        // Sigma11^{-1} (u - mu 1)
  double jitter = 0.0;

  Eigen::Index size() const { return features.rows(); }
  Eigen::Index feature_dim() const { return features.cols(); }
};

/// Core assembly used by build_model and by the online-update rebuild. Does
/// not enforce the N >= 2 training contract, so degenerate models (N = 1)
/// can still be formed where the math is well defined.
inline SdcmModel assemble_model(std::vector<CalibrationSample> samples,
                                const Hyperparameters& theta, const NormalizationConfig& norm,
                                const WindowSpec& window,
                                const std::optional<FeatureStats>& frozen = std::nullopt) {
  validate(theta);
  PreparedDataset d = prepare_dataset(samples, norm, frozen);
  Eigen::MatrixXd sigma11 = kernel_matrix(d.sqdist, theta.delta, theta.sigma);
  sigma11.diagonal().array() += theta.sigma_u_tilde * theta.sigma_u_tilde;
  SpdFactor f = factorize_spd(sigma11);

  SdcmModel m;
  m.window = window;
  m.dataset = std::move(samples);
  m.theta = theta;
  m.norm = norm;
  m.stats = d.stats;
  m.mu = d.mu;
  m.features = std::move(d.Z);
  m.targets = std::move(d.u);
  m.alpha = f.llt.solve((m.targets.array() - m.mu).matrix());
  m.sigma11_llt = std::move(f.llt);
  m.jitter = f.jitter;
  return m;
}

/// Builds the calibration map from a dataset and fixed hyperparameters.
inline SdcmModel build_model(std::vector<CalibrationSample> samples, const Hyperparameters& theta,
                             const NormalizationConfig& norm, const WindowSpec& window) {
  if (samples.size() < 2) throw invalid_input("build_model: need at least 2 samples");
  for (const auto& s : samples)
    if (s.z.size() != window.feature_dim())
      throw invalid_input("build_model: sample dimension does not match window spec");
  return assemble_model(std::move(samples), theta, norm, window);
}

// Variance round-off tolerance, in normalized units.
inline constexpr double kVarianceTolerance = 1e-8;

/// Posterior mean/variance of the sensed value for a raw-unit query vector.
inline PosteriorEstimate predict(const SdcmModel& m, const Eigen::VectorXd& z_raw) {
  if (z_raw.size() != m.feature_dim())
    throw invalid_input("predict: query dimension " + std::to_string(z_raw.size()) +
                        " does not match model dimension " + std::to_string(m.feature_dim()));
  const Eigen::VectorXd zn = m.stats.apply(z_raw);
  const Eigen::VectorXd k = kernel_cross(m.features, zn, m.theta.delta, m.theta.sigma);
  const double mean_n = k.dot(m.alpha) + m.mu;
  double var_n = m.theta.sigma * m.theta.sigma - k.dot(m.sigma11_llt.solve(k));

  PosteriorEstimate e;
  if (var_n < 0.0) {
    if (var_n < -kVarianceTolerance) {
      std::ostringstream msg;
      msg << "predict: normalized posterior variance " << var_n << " below -"
          << kVarianceTolerance;
      throw numerical_error(msg.str());
    }
    var_n = 0.0;
    e.variance_clamped = true;
  }
  const double s = m.norm.target_scale;
  e.mean = mean_n * s;
  e.variance = var_n * s * s;
  e.confidence = var_n > 0.0 ? 1.0 / std::sqrt(var_n) : std::numeric_limits<double>::infinity();
  return e;
}

}  // namespace sdcm
