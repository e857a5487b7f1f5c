#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "sdcm/lhs.hpp"
#include "sdcm/model.hpp"
#include "sdcm/parallel.hpp"
#include "sdcm/types.hpp"
#include "sdcm/windowing.hpp"

namespace sdcm {

/// Thresholds of the online replacement rule. eps_u gates outliers on the
/// prediction residual, c sets the similarity decay rate, eps_gamma switches
/// between the nearest-sample and most-redundant-sample branches. All in
/// normalized units.
struct UpdateConfig {
  double eps_u = 0.0;
  double c = 0.0;
  double eps_gamma = 0.0;
};

inline void validate(const UpdateConfig& c) {
  if (c.eps_u < 0.0 || c.c < 0.0 || c.eps_gamma < 0.0)
    throw invalid_input("UpdateConfig: thresholds must be non-negative");
}

/// Augmented sample vectors v_i = [z_i, u_i] in normalized units, one row per
/// dataset entry.
inline Eigen::MatrixXd augmented_matrix(const SdcmModel& m) {
  Eigen::MatrixXd v(m.size(), m.feature_dim() + 1);
  v.leftCols(m.feature_dim()) = m.features;
  v.col(m.feature_dim()) = m.targets;
  return v;
}

inline Eigen::VectorXd augmented_vector(const SdcmModel& m, const CalibrationSample& s) {
  Eigen::VectorXd v(m.feature_dim() + 1);
  v.head(m.feature_dim()) = m.stats.apply(s.z);
  v[m.feature_dim()] = s.u / m.norm.target_scale;
  return v;
}

/// Normalized prediction residual |mu_u(z_new) - u_new| used by the outlier
/// gate.
inline double update_residual(const SdcmModel& m, const CalibrationSample& s) {
  return std::abs(predict(m, s.z).mean - s.u) / m.norm.target_scale;
}

/// A sample is an outlier when its residual strictly exceeds eps_u.
inline bool is_outlier(const SdcmModel& m, const CalibrationSample& s, double eps_u) {
  if (eps_u < 0.0) throw invalid_input("is_outlier: eps_u must be non-negative");
  return update_residual(m, s) > eps_u;
}

/// S[i][j] = exp(-c ||v_i - v_j||): symmetric, unit diagonal, entries in (0,1].
inline Eigen::MatrixXd similarity_matrix(const Eigen::MatrixXd& v, double c) {
  if (c < 0.0) throw invalid_input("similarity_matrix: c must be non-negative");
  Eigen::MatrixXd s = (-c * pairwise_sqdist(v).array().sqrt()).exp().matrix();
  s.triangularView<Eigen::StrictlyUpper>() = s.transpose();
  return s;
}

inline Eigen::MatrixXd similarity_matrix(const SdcmModel& m, double c) {
  return similarity_matrix(augmented_matrix(m), c);
}

enum class ReplaceBranch { nearest, most_redundant };

struct ReplaceChoice {
  Eigen::Index index = -1;
  ReplaceBranch branch = ReplaceBranch::nearest;
  double gamma = 0.0;
};

namespace detail {

inline ReplaceChoice choose_with_gamma(const SdcmModel& m, const CalibrationSample& s,
                                       const UpdateConfig& cfg, double gamma) {
  if (m.size() == 0) throw invalid_input("choose_replacement: empty dataset");
  ReplaceChoice choice;
  choice.gamma = gamma;
  const Eigen::MatrixXd v = augmented_matrix(m);
  if (gamma >= cfg.eps_gamma) {
    choice.branch = ReplaceBranch::nearest;
    const Eigen::VectorXd vn = augmented_vector(m, s);
    (v.rowwise() - vn.transpose()).rowwise().squaredNorm().minCoeff(&choice.index);
  } else {
    choice.branch = ReplaceBranch::most_redundant;
    similarity_matrix(v, cfg.c).rowwise().sum().maxCoeff(&choice.index);
  }
  return choice;
}

}  // namespace detail

/// Picks the dataset slot a non-outlier sample replaces: with confident
/// predictions the nearest sample in v-space goes, otherwise the most
/// redundant one (largest similarity row sum). Ties break to the lowest
/// index.
inline ReplaceChoice choose_replacement(const SdcmModel& m, const CalibrationSample& s,
                                        const UpdateConfig& cfg) {
  validate(cfg);
  return detail::choose_with_gamma(m, s, cfg, predict(m, s.z).confidence);
}

/// Audit record of one online event. The timestamp is the incoming sample's
/// elapsed time, so replaying a recorded stream reproduces the log exactly.
struct UpdateEvent {
  double t_s = 0.0;
  std::string decision;  // "outlier" | "replace_nearest" | "replace_redundant"
  double residual = 0.0;
  double gamma = std::numeric_limits<double>::quiet_NaN();
  long replaced_index = -1;
  UpdateConfig config;
};

struct UpdateResult {
  std::optional<SdcmModel> model;  // empty when the sample was rejected
  UpdateEvent event;
};

/// One step of the online recalibration loop: gate on the residual, pick the
/// replacement slot, rebuild the map with the dataset size unchanged. The
/// prior mean is recomputed (it is defined as the dataset mean) while
/// feature statistics, target scale and hyperparameters stay frozen from the
/// initial training. On rejection the model is left untouched and the event
/// flags an outlier alert.
inline UpdateResult update_step(const SdcmModel& m, const CalibrationSample& s,
                                const UpdateConfig& cfg) {
  validate(cfg);
  if (s.z.size() != m.feature_dim())
    throw invalid_input("update_step: sample dimension does not match model");
  UpdateResult res;
  res.event.t_s = s.z[s.z.size() - 1];
  res.event.config = cfg;
  const PosteriorEstimate est = predict(m, s.z);
  res.event.residual = std::abs(est.mean - s.u) / m.norm.target_scale;
  res.event.gamma = est.confidence;
  if (res.event.residual > cfg.eps_u) {
    res.event.decision = "outlier";
    return res;
  }
  const ReplaceChoice choice = detail::choose_with_gamma(m, s, cfg, est.confidence);
  res.event.replaced_index = choice.index;
  res.event.decision =
      choice.branch == ReplaceBranch::nearest ? "replace_nearest" : "replace_redundant";

  std::vector<CalibrationSample> dataset = m.dataset;
  dataset[static_cast<std::size_t>(choice.index)] = s;
  res.model = assemble_model(std::move(dataset), m.theta, m.norm, m.window, m.stats);
  return res;
}

// --- Threshold tuning --------------------------------------------------------

struct TuneConfig {
  std::pair<double, double> eps_u_range{0.0, 0.1};
  std::pair<double, double> c_range{0.2, 1.0};
  std::pair<double, double> eps_gamma_range{2.0, 7.0};
  int n_candidates = 6;
  double split_time_s = 9.0 * 3600.0;  // stream before this updates, after this scores
  std::uint64_t rng_seed = 0;
  int n_threads = 0;
};

struct CandidateScore {
  UpdateConfig config;
  double mean_pae = std::numeric_limits<double>::quiet_NaN();
  int updates = 0;
  int outliers = 0;
  int scored = 0;
};

struct TuneResult {
  UpdateConfig best;
  std::vector<CandidateScore> candidates;
};

namespace detail {

/// Replays updates over the pre-split samples, then scores mean PAE of the
/// final model on the post-split samples against their references.
inline CandidateScore score_candidate(const SdcmModel& base, const UpdateConfig& cfg,
                                      const std::vector<CalibrationSample>& update_part,
                                      const std::vector<CalibrationSample>& score_part) {
  CandidateScore out;
  out.config = cfg;
  SdcmModel current = base;
  for (const auto& s : update_part) {
    UpdateResult r = update_step(current, s, cfg);
    if (r.model) {
      current = std::move(*r.model);
      ++out.updates;
    } else {
      ++out.outliers;
    }
  }
  double sum = 0.0;
  for (const auto& s : score_part) {
    if (!(s.u > 0.0)) continue;  // PAE undefined
    sum += 100.0 * std::abs(predict(current, s.z).mean - s.u) / s.u;
    ++out.scored;
  }
  out.mean_pae = out.scored > 0 ? sum / out.scored : std::numeric_limits<double>::infinity();
  return out;
}

}  // namespace detail

/// Latin-hypercube search for (eps_u, c, eps_gamma): each candidate replays
/// the update segment of the tuning series and is scored by mean PAE on the
/// rest; least mean PAE wins, ties to the lowest candidate index.
inline TuneResult tune_update_params(const SdcmModel& model, const TimeSeries& tuning_series,
                                     const TuneConfig& cfg) {
  if (cfg.n_candidates < 1) throw invalid_input("tune_update_params: need at least one candidate");
  const std::vector<CalibrationSample> samples = extract_samples(tuning_series, model.window);
  std::vector<CalibrationSample> update_part, score_part;
  for (const auto& s : samples) {
    const double t = s.z[s.z.size() - 1];
    (t <= cfg.split_time_s ? update_part : score_part).push_back(s);
  }
  if (update_part.empty() || score_part.empty())
    throw invalid_input("tune_update_params: tuning series too short to cover both segments");

  std::mt19937_64 rng(cfg.rng_seed);
  const Eigen::MatrixXd pts = latin_hypercube(
      cfg.n_candidates, {cfg.eps_u_range, cfg.c_range, cfg.eps_gamma_range}, rng);

  TuneResult out;
  out.candidates.resize(static_cast<std::size_t>(cfg.n_candidates));
  parallel_for(out.candidates.size(), cfg.n_threads, [&](std::size_t i) {
    const UpdateConfig candidate{pts(static_cast<Eigen::Index>(i), 0),
                                 pts(static_cast<Eigen::Index>(i), 1),
                                 pts(static_cast<Eigen::Index>(i), 2)};
    out.candidates[i] = detail::score_candidate(model, candidate, update_part, score_part);
  });

  std::size_t best = 0;
  for (std::size_t i = 1; i < out.candidates.size(); ++i)
    if (out.candidates[i].mean_pae < out.candidates[best].mean_pae) best = i;
  out.best = out.candidates[best].config;
  return out;
}

}  // namespace sdcm
