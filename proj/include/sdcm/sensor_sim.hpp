#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "sdcm/errors.hpp"
#include "sdcm/types.hpp"

namespace sdcm {

inline double logistic(double w) { return 1.0 / (1.0 + std::exp(-w)); }

/// Stock nonlinear drifting sensor: a first-order ZOH-discretized latent
/// state driven by the sensed quantity, and a fractional-power output map
/// whose gain drifts with elapsed time. The stock numbers correspond to a
/// 15-minute time constant at 3-minute sampling and a DC gain near 900.
///
/// The drift term divides elapsed time by 3*lifespan. With lifespan kept as
/// the bare number 1140 and t in seconds, the drift argument sweeps 0..20
/// over a 19-hour deployment, which produces the intended sigmoidal onset
/// and roll-off. The alternative reading (t converted to minutes first) is
/// selectable but leaves the drift numerically flat.
struct SensorModel {
  double state_decay = 0.8187;   // must be inside the unit circle
  double input_gain = 163.1;
  double lifespan = 1140.0;      // T in the drift divisor 3*T
  double output_gain = 0.2;
  double state_exponent = 0.1;
  double drift_offset = 0.8;
  double drift_onset = 5.0;      // centers tanh/sigmoid rise
  double drift_base = 0.6;
  double drift_rolloff = 17.0;   // centers the late-life decline
  bool drift_time_in_minutes = false;

  double x = 0.0;  // latent state; deployment starts at x=0, t=0

  void reset() { x = 0.0; }
};

inline void validate(const SensorModel& m) {
  if (!(std::abs(m.state_decay) < 1.0))
    throw invalid_input("SensorModel: |state_decay| must be < 1 for stability");
  if (!(m.lifespan > 0.0)) throw invalid_input("SensorModel: lifespan must be positive");
}

/// Time-dependent multiplicative sensitivity factor of the output map.
inline double drift_bracket(const SensorModel& m, double t_seconds) {
  const double t = m.drift_time_in_minutes ? t_seconds / 60.0 : t_seconds;
  const double w = t / (3.0 * m.lifespan) - m.drift_onset;
  const double tail = m.drift_base + logistic(m.drift_rolloff - t / (3.0 * m.lifespan));
  return m.drift_offset + std::tanh(w) * logistic(w) * tail;
}

/// Advances the sensor one sample: emits y_k from the pre-update state, then
/// folds u_k into the state. Negative inputs are rejected (fractional power).
inline double sensor_step(SensorModel& m, double u, double t_seconds) {
  if (u < 0.0) throw invalid_input("sensor_step: negative input to fractional-power output map");
  const double y = m.output_gain * std::pow(m.x, m.state_exponent) * drift_bracket(m, t_seconds);
  m.x = m.state_decay * m.x + m.input_gain * u;
  return y;
}

/// Runs the sensor over a uniformly sampled input profile from a fresh
/// deployment (x=0, t=0) and returns the measurement series with the profile
/// attached as reference.
inline TimeSeries simulate_series(SensorModel model, const std::vector<double>& u_profile,
                                  double sample_interval_s, std::string series_id) {
  validate(model);
  model.reset();
  TimeSeries out;
  out.series_id = std::move(series_id);
  out.sample_interval = sample_interval_s;
  out.t.reserve(u_profile.size());
  out.y.reserve(u_profile.size());
  out.u_ref.emplace().reserve(u_profile.size());
  for (std::size_t k = 0; k < u_profile.size(); ++k) {
    const double t = static_cast<double>(k) * sample_interval_s;
    out.t.push_back(t);
    out.y.push_back(sensor_step(model, u_profile[k], t));
    out.u_ref->push_back(u_profile[k]);
  }
  return out;
}

// --- Synthetic reference profiles ------------------------------------------
//
// Stand-in generator for the virtual-patient traces: a baseline level plus
// smooth meal excursions (lagged rise, slower decay) minus insulin responses.
// Entirely synthetic plumbing; swap in real CSV profiles for anything beyond
// desk experiments.

/// One smooth excursion: zero before onset_s, rises like (dt/rise)^2 and
/// decays exponentially after peaking at `magnitude` one rise-time in.
struct BolusEvent {
  double onset_s = 0.0;
  double magnitude = 0.0;  // peak amplitude, mg/dL
  double rise_s = 1800.0;  // time to peak
};

inline double bolus_value(const BolusEvent& e, double t) {
  if (t <= e.onset_s || e.rise_s <= 0.0) return 0.0;
  const double w = (t - e.onset_s) / e.rise_s;
  return e.magnitude * w * w * std::exp(2.0 * (1.0 - w));
}

struct BglProfileSpec {
  double baseline = 110.0;  // mg/dL
  std::vector<BolusEvent> meals;
  std::vector<BolusEvent> insulin;
  double duration_s = 19.0 * 3600.0;
  double sample_interval_s = 180.0;
};

struct GeneratedProfile {
  std::vector<double> t;
  std::vector<double> u;
  int clipped = 0;  // samples forced back into the physiological band
};

inline constexpr double kBglFloor = 20.0;
inline constexpr double kBglCeil = 600.0;

inline GeneratedProfile generate_profile(const BglProfileSpec& spec) {
  if (!(spec.duration_s > 0.0)) throw invalid_input("generate_profile: duration must be positive");
  if (!(spec.sample_interval_s > 0.0))
    throw invalid_input("generate_profile: sample interval must be positive");
  GeneratedProfile out;
  const auto n = static_cast<std::size_t>(std::floor(spec.duration_s / spec.sample_interval_s)) + 1;
  out.t.reserve(n);
  out.u.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) * spec.sample_interval_s;
    double u = spec.baseline;
    for (const auto& m : spec.meals) u += bolus_value(m, t);
    for (const auto& i : spec.insulin) u -= bolus_value(i, t);
    if (u < kBglFloor) {
      u = kBglFloor;
      ++out.clipped;
    } else if (u > kBglCeil) {
      u = kBglCeil;
      ++out.clipped;
    }
    out.t.push_back(t);
    out.u.push_back(u);
  }
  return out;
}

/// Draws one profile spec from the population distributions: baseline,
/// meal count/timing/size and the paired insulin responses all vary between
/// profiles, mimicking the spread of a small patient population.
inline BglProfileSpec sample_profile_spec(std::mt19937_64& rng,
                                          double duration_s = 19.0 * 3600.0,
                                          double sample_interval_s = 180.0) {
  auto uniform = [&rng](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };
  BglProfileSpec spec;
  spec.duration_s = duration_s;
  spec.sample_interval_s = sample_interval_s;
  spec.baseline = uniform(95.0, 130.0);

  // meals roughly every 4-5 hours with per-profile jitter
  const double meal_anchor_s[] = {2.0 * 3600, 6.5 * 3600, 11.0 * 3600, 15.5 * 3600};
  for (double anchor : meal_anchor_s) {
    if (anchor > duration_s) break;
    BolusEvent meal;
    meal.onset_s = anchor + uniform(-2400.0, 2400.0);
    meal.magnitude = uniform(45.0, 130.0);
    meal.rise_s = uniform(1500.0, 3000.0);
    if (meal.onset_s < 0.0) meal.onset_s = 0.0;
    spec.meals.push_back(meal);

    // most meals are followed by an insulin response
    if (uniform(0.0, 1.0) < 0.9) {
      BolusEvent shot;
      shot.onset_s = meal.onset_s + uniform(900.0, 2400.0);
      shot.magnitude = meal.magnitude * uniform(0.35, 0.65);
      shot.rise_s = meal.rise_s * uniform(1.5, 2.5);
      spec.insulin.push_back(shot);
    }
  }
  return spec;
}

/// A reproducible population of n profile specs.
inline std::vector<BglProfileSpec> sample_population(int n_profiles, std::uint64_t rng_seed,
                                                     double duration_s = 19.0 * 3600.0,
                                                     double sample_interval_s = 180.0) {
  if (n_profiles < 0) throw invalid_input("sample_population: negative profile count");
  std::mt19937_64 rng(rng_seed);
  std::vector<BglProfileSpec> specs;
  specs.reserve(static_cast<std::size_t>(n_profiles));
  for (int i = 0; i < n_profiles; ++i)
    specs.push_back(sample_profile_spec(rng, duration_s, sample_interval_s));
  return specs;
}

}  // namespace sdcm
