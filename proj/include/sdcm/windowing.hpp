#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "sdcm/errors.hpp"
#include "sdcm/types.hpp"

namespace sdcm {

/// Keeps every factor-th sample starting at index 0; the sample interval is
/// multiplied accordingly. Plain decimation, no anti-aliasing.
inline TimeSeries downsample(const TimeSeries& s, int factor) {
  if (factor < 1) throw invalid_input("downsample: factor must be >= 1");
  if (factor == 1) return s;
  TimeSeries out;
  out.series_id = s.series_id;
  out.sample_interval = s.sample_interval * factor;
  const std::size_t n = (s.size() + factor - 1) / factor;
  out.t.reserve(n);
  out.y.reserve(n);
  if (s.u_ref) out.u_ref.emplace().reserve(n);
  for (std::size_t k = 0; k < s.size(); k += static_cast<std::size_t>(factor)) {
    out.t.push_back(s.t[k]);
    out.y.push_back(s.y[k]);
    if (s.u_ref) out.u_ref->push_back((*s.u_ref)[k]);
  }
  return out;
}

/// Adds i.i.d. zero-mean Gaussian noise to the reference channel with
/// variance mean(u_ref^2) / 10^(snr_db/10), i.e. the series' own mean power
/// sets the scale. Sensor outputs and times are untouched. An infinite
/// snr_db disables the corruption.
inline TimeSeries add_reference_noise(const TimeSeries& s, double snr_db, std::uint64_t rng_seed) {
  if (!s.u_ref) throw invalid_input("add_reference_noise: series has no reference channel");
  if (std::isnan(snr_db)) throw invalid_input("add_reference_noise: snr_db is NaN");
  if (std::isinf(snr_db)) return s;
  TimeSeries out = s;
  double power = 0.0;
  for (double u : *s.u_ref) power += u * u;
  power /= static_cast<double>(s.u_ref->size());
  const double noise_std = std::sqrt(power / std::pow(10.0, snr_db / 10.0));
  std::mt19937_64 rng(rng_seed);
  std::normal_distribution<double> gauss(0.0, noise_std);
  for (double& u : *out.u_ref) u += gauss(rng);
  return out;
}

/// Emits one sample per center index k in [p, len-1-ell]:
/// z_k = [y_{k-p}, ..., y_k, y_{k+1}, ..., y_{k+ell}, t_k] paired with the
/// reference at k. Output count is len - p - ell.
inline std::vector<CalibrationSample> extract_samples(const TimeSeries& s,
                                                      const WindowSpec& spec) {
  validate(spec);
  if (!s.u_ref) throw invalid_input("extract_samples: series has no reference channel");
  const std::size_t need = static_cast<std::size_t>(spec.window_len());
  if (s.size() < need)
    throw invalid_input("extract_samples: series '" + s.series_id + "' shorter than window (" +
                        std::to_string(s.size()) + " < " + std::to_string(need) + ")");
  std::vector<CalibrationSample> out;
  out.reserve(s.size() - need + 1);
  for (std::size_t k = static_cast<std::size_t>(spec.p); k + spec.ell < s.size(); ++k) {
    CalibrationSample cs;
    cs.z.resize(spec.feature_dim());
    for (int j = 0; j < spec.window_len(); ++j)
      cs.z[j] = s.y[k - static_cast<std::size_t>(spec.p) + static_cast<std::size_t>(j)];
    cs.z[spec.feature_dim() - 1] = s.t[k];
    cs.u = (*s.u_ref)[k];
    out.push_back(std::move(cs));
  }
  return out;
}

/// Deterministic whole-series partition. Every id lands on exactly one side;
/// with n series, round(test_fraction * n) go to test (at least 1, at most
/// n - 1).
struct SeriesSplit {
  std::vector<std::string> train_ids;
  std::vector<std::string> test_ids;
};

inline SeriesSplit split_by_series(std::vector<std::string> series_ids, double test_fraction,
                                   std::uint64_t rng_seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw invalid_input("split_by_series: test_fraction must be in (0, 1)");
  std::sort(series_ids.begin(), series_ids.end());
  series_ids.erase(std::unique(series_ids.begin(), series_ids.end()), series_ids.end());
  const std::size_t n = series_ids.size();
  if (n < 2) throw invalid_input("split_by_series: need at least 2 distinct series");
  std::mt19937_64 rng(rng_seed);
  std::shuffle(series_ids.begin(), series_ids.end(), rng);
  std::size_t n_test = static_cast<std::size_t>(
      std::llround(test_fraction * static_cast<double>(n)));
  n_test = std::clamp<std::size_t>(n_test, 1, n - 1);
  SeriesSplit split;
  split.test_ids.assign(series_ids.begin(), series_ids.begin() + static_cast<long>(n_test));
  split.train_ids.assign(series_ids.begin() + static_cast<long>(n_test), series_ids.end());
  std::sort(split.test_ids.begin(), split.test_ids.end());
  std::sort(split.train_ids.begin(), split.train_ids.end());
  return split;
}

}  // namespace sdcm
