#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "sdcm/likelihood.hpp"
#include "sdcm/model.hpp"
#include "sdcm/parallel.hpp"

namespace sdcm {

struct ParamRange {
  double init = 1.0;
  double lo = 1e-5;
  double hi = 1e4;
};

/// Multi-start search settings. The default initial guesses and ranges follow
/// the usual choice for this estimator: delta and sigma start at 1 over
/// [1e-5, 1e4], sigma_u starts at 1e-3 over [1e-5, 1e-1].
struct SearchConfig {
  int n_trials = 100;
  ParamRange delta{1.0, 1e-5, 1e4};
  ParamRange sigma{1.0, 1e-5, 1e4};
  ParamRange sigma_u{1e-3, 1e-5, 1e-1};
  std::uint64_t rng_seed = 0;
  int max_iterations = 200;
  double tolerance = 1e-6;  // gradient norm in log-space
  bool centered = true;
  int n_threads = 0;  // 0 = hardware concurrency; trials are independent
};

inline void validate(const ParamRange& r, const char* name) {
  if (!(r.lo < r.hi)) throw invalid_input(std::string("SearchConfig: ") + name + " needs lo < hi");
  if (r.init < r.lo || r.init > r.hi)
    throw invalid_input(std::string("SearchConfig: ") + name + " initial guess outside range");
  if (!(r.lo > 0.0)) throw invalid_input(std::string("SearchConfig: ") + name + " must stay positive");
}

inline void validate(const SearchConfig& c) {
  if (c.n_trials < 1) throw invalid_input("SearchConfig: n_trials must be >= 1");
  if (c.max_iterations < 1) throw invalid_input("SearchConfig: max_iterations must be >= 1");
  if (!(c.tolerance > 0.0)) throw invalid_input("SearchConfig: tolerance must be positive");
  validate(c.delta, "delta");
  validate(c.sigma, "sigma");
  validate(c.sigma_u, "sigma_u");
}

struct TrialRecord {
  int index = 0;  // 1-based
  Hyperparameters start;
  Hyperparameters result;
  double log_likelihood = -std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = false;  // gradient-norm criterion met
  bool failed = false;     // factorization failed at the starting point
};

struct FitResult {
  Hyperparameters theta;
  double log_likelihood = -std::numeric_limits<double>::infinity();
  std::vector<TrialRecord> trials;
};

namespace detail {

using LogVec = Eigen::Vector3d;

inline LogVec to_log(const Hyperparameters& h) {
  return {std::log(h.delta), std::log(h.sigma), std::log(h.sigma_u_tilde)};
}

inline Hyperparameters from_log(const LogVec& x) {
  return {std::exp(x[0]), std::exp(x[1]), std::exp(x[2])};
}

// exp(log(hi)) can overshoot hi by an ulp; reported parameters are clamped
// in the linear domain so they verifiably honor the configured ranges.
inline Hyperparameters clamp_linear(const Hyperparameters& h, const SearchConfig& c) {
  return {std::clamp(h.delta, c.delta.lo, c.delta.hi),
          std::clamp(h.sigma, c.sigma.lo, c.sigma.hi),
          std::clamp(h.sigma_u_tilde, c.sigma_u.lo, c.sigma_u.hi)};
}

struct LogBounds {
  LogVec lo, hi;
  LogVec clamp(const LogVec& x) const { return x.cwiseMax(lo).cwiseMin(hi); }
};

inline LogBounds log_bounds(const SearchConfig& c) {
  LogBounds b;
  b.lo = {std::log(c.delta.lo), std::log(c.sigma.lo), std::log(c.sigma_u.lo)};
  b.hi = {std::log(c.delta.hi), std::log(c.sigma.hi), std::log(c.sigma_u.hi)};
  return b;
}

/// Projected gradient ascent with Armijo backtracking, in log-space.
inline TrialRecord run_trial(const PreparedDataset& data, const Hyperparameters& start,
                             const SearchConfig& cfg, int index) {
  const LikelihoodOptions opts{cfg.centered};
  const LogBounds bounds = log_bounds(cfg);
  constexpr double kArmijo = 1e-4;
  constexpr double kMinStep = 1e-12;

  TrialRecord rec;
  rec.index = index;
  rec.start = start;
  rec.result = start;

  LogVec x = bounds.clamp(to_log(start));
  LikelihoodEval cur;
  try {
    cur = likelihood_with_gradient(data, from_log(x), opts);
  } catch (const numerical_error&) {
    rec.failed = true;
    return rec;
  }

  // Never move more than a couple of log-units in one jump: the raw gradient
  // norm can reach 1e3+ near overconfident-noise regions, and an uncapped
  // first step teleports the iterate across basins into the flat
  // no-correlation trap near the delta floor.
  constexpr double kMaxStepNorm = 2.0;
  constexpr double kStallTolerance = 1e-7;
  double step0 = 1.0;
  int stalled = 0;
  int it = 0;
  for (; it < cfg.max_iterations; ++it) {
    if (cur.grad.norm() < cfg.tolerance) {
      rec.converged = true;
      break;
    }
    bool accepted = false;
    const double t_start = std::min(step0, kMaxStepNorm / cur.grad.norm());
    for (double t = t_start; t >= kMinStep; t *= 0.5) {
      const LogVec xn = bounds.clamp(x + t * cur.grad);
      const LogVec delta = xn - x;
      if (delta.norm() < kMinStep) break;  // pinned at the boundary
      double fn;
      try {
        fn = log_marginal_likelihood(data, from_log(xn), opts);
      } catch (const numerical_error&) {
        continue;  // badly conditioned trial point; shrink the step
      }
      if (fn >= cur.value + kArmijo * cur.grad.dot(delta)) {
        stalled = fn - cur.value < kStallTolerance ? stalled + 1 : 0;
        x = xn;
        cur = likelihood_with_gradient(data, from_log(x), opts);
        step0 = std::min(1.0, 2.0 * t);
        accepted = true;
        break;
      }
    }
    if (!accepted) break;     // line search exhausted: local optimum or boundary
    if (stalled >= 3) break;  // flat stretch; restarts are cheaper than crawling
  }
  rec.iterations = it;
  rec.result = clamp_linear(from_log(x), cfg);
  rec.log_likelihood = cur.value;
  return rec;
}

}  // namespace detail

/// Empirical-Bayes hyperparameter selection: trial 1 starts from the
/// configured initial guesses, the rest from independent log-uniform draws
/// over each range. Every trial runs gradient ascent clamped to the ranges;
/// the best final likelihood wins, ties broken by lowest trial index. The
/// full per-trial log is returned for audit. Deterministic given rng_seed.
inline FitResult fit(const PreparedDataset& data, const SearchConfig& cfg) {
  validate(cfg);

  // All starting points are drawn up front so the result does not depend on
  // how trials are scheduled across threads.
  std::vector<Hyperparameters> starts;
  starts.reserve(static_cast<std::size_t>(cfg.n_trials));
  starts.push_back({cfg.delta.init, cfg.sigma.init, cfg.sigma_u.init});
  std::mt19937_64 rng(cfg.rng_seed);
  auto log_uniform = [&rng](const ParamRange& r) {
    std::uniform_real_distribution<double> d(std::log(r.lo), std::log(r.hi));
    return std::exp(d(rng));
  };
  for (int i = 1; i < cfg.n_trials; ++i) {
    Hyperparameters h;
    h.delta = log_uniform(cfg.delta);
    h.sigma = log_uniform(cfg.sigma);
    h.sigma_u_tilde = log_uniform(cfg.sigma_u);
    starts.push_back(detail::clamp_linear(h, cfg));
  }

  std::vector<TrialRecord> trials(starts.size());
  parallel_for(starts.size(), cfg.n_threads, [&](std::size_t i) {
    trials[i] = detail::run_trial(data, starts[i], cfg, static_cast<int>(i) + 1);
  });

  FitResult out;
  out.trials = std::move(trials);
  bool any = false;
  for (const auto& t : out.trials) {
    if (t.failed) continue;
    if (!any || t.log_likelihood > out.log_likelihood) {
      any = true;
      out.theta = t.result;
      out.log_likelihood = t.log_likelihood;
    }
  }
  if (!any) throw numerical_error("fit: every trial failed to factorize Sigma11");
  return out;
}

/// Convenience overload starting from raw samples.
inline FitResult fit(const std::vector<CalibrationSample>& samples, const SearchConfig& cfg,
                     const NormalizationConfig& norm) {
  if (samples.size() < 2) throw invalid_input("fit: need at least 2 samples");
  return fit(prepare_dataset(samples, norm), cfg);
}

}  // namespace sdcm
