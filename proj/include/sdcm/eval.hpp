#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "sdcm/errors.hpp"
#include "sdcm/hyperopt.hpp"
#include "sdcm/model.hpp"
#include "sdcm/parallel.hpp"
#include "sdcm/rng.hpp"
#include "sdcm/windowing.hpp"

namespace sdcm {

/// Percent absolute error against a positive truth value.
inline double pae(double true_u, double est_u) {
  if (!(true_u > 0.0)) throw invalid_input("pae: truth must be positive");
  return 100.0 * std::abs(est_u - true_u) / true_u;
}

struct ErrorRecord {
  std::string series_id;
  long k = 0;        // center index within the series
  double t_s = 0.0;  // elapsed time of the estimate
  double true_u = 0.0;
  double est_u = 0.0;
  double abs_err = 0.0;
  double pae = 0.0;
};

inline ErrorRecord make_error_record(std::string series_id, long k, double t_s, double true_u,
                                     double est_u) {
  ErrorRecord r;
  r.series_id = std::move(series_id);
  r.k = k;
  r.t_s = t_s;
  r.true_u = true_u;
  r.est_u = est_u;
  r.abs_err = std::abs(est_u - true_u);
  r.pae = pae(true_u, est_u);
  return r;
}

/// Blood-glucose accuracy rule: above 100 mg/dL a record passes within 15%
/// relative error, at or below 100 mg/dL within 15 mg/dL absolute. The set
/// passes when at least 95% of records do.
struct IsoResult {
  double pass_fraction = 0.0;
  bool pass = false;
};

inline bool iso15197_record_pass(const ErrorRecord& r) {
  return r.true_u > 100.0 ? r.pae <= 15.0 : r.abs_err <= 15.0;
}

inline IsoResult iso15197_check(const std::vector<ErrorRecord>& records) {
  if (records.empty()) throw invalid_input("iso15197_check: no records");
  std::size_t passed = 0;
  for (const auto& r : records)
    if (iso15197_record_pass(r)) ++passed;
  IsoResult out;
  out.pass_fraction = static_cast<double>(passed) / static_cast<double>(records.size());
  out.pass = out.pass_fraction >= 0.95;
  return out;
}

/// Quartiles by linear interpolation; whiskers sit at median +/- 2*IQR and
/// anything strictly beyond them is an outlier.
struct BoxplotStats {
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double iqr = 0.0;
  double whisker_lo = 0.0;
  double whisker_hi = 0.0;
  std::vector<double> outliers;
};

inline double quantile_sorted(const std::vector<double>& sorted, double q) {
  const double h = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

inline BoxplotStats boxplot_stats(std::vector<double> values) {
  if (values.empty()) throw invalid_input("boxplot_stats: no values");
  std::sort(values.begin(), values.end());
  BoxplotStats s;
  s.q1 = quantile_sorted(values, 0.25);
  s.median = quantile_sorted(values, 0.50);
  s.q3 = quantile_sorted(values, 0.75);
  s.iqr = s.q3 - s.q1;
  s.whisker_lo = s.median - 2.0 * s.iqr;
  s.whisker_hi = s.median + 2.0 * s.iqr;
  for (double v : values)
    if (v < s.whisker_lo || v > s.whisker_hi) s.outliers.push_back(v);
  return s;
}

// --- Cross-validation ---------------------------------------------------------

enum class SplitMode { by_series, by_sample };

/// Randomized cross-validation over a set of reference series: each fold
/// redraws the train/test split, injects reference noise at the requested
/// SNR into the training references, fits hyperparameters and scores test
/// records against the clean truth. An infinite SNR entry means "no
/// injection" (real-data mode, where the given references are the only
/// truth).
struct CvConfig {
  int n_folds = 10;
  SplitMode mode = SplitMode::by_series;
  double test_fraction = 0.2;
  std::vector<double> snr_db_list{std::numeric_limits<double>::infinity()};
  WindowSpec window;
  int downsample_factor = 1;
  SearchConfig search;
  NormalizationConfig norm;
  std::size_t max_train_samples = 2000;  // 0 disables the cap
  std::uint64_t rng_seed = 0;
  int n_threads = 0;  // folds run in parallel; each fold fits single-threaded
};

struct FoldResult {
  double snr_db = 0.0;
  int fold = 0;
  Hyperparameters theta;
  double log_likelihood = 0.0;
  std::vector<std::string> train_ids;  // by-series mode
  std::vector<ErrorRecord> records;
};

struct SnrAggregate {
  double snr_db = 0.0;
  int n_records = 0;
  double mean_pae = 0.0;
  BoxplotStats pae_stats;
  IsoResult iso;
};

struct CvResult {
  std::vector<FoldResult> folds;
  std::vector<SnrAggregate> aggregates;
};

/// Training sample plus the clean truth of its center reference.
struct SamplePair {
  CalibrationSample noisy;
  double true_u = 0.0;
  std::string series_id;
  long k = 0;
};

/// Noise-injected samples of one series, each paired with the clean center
/// reference for scoring.
inline std::vector<SamplePair> paired_samples(const TimeSeries& clean, double snr_db,
                                              std::uint64_t noise_seed, const WindowSpec& w) {
  const TimeSeries noisy = add_reference_noise(clean, snr_db, noise_seed);
  std::vector<CalibrationSample> ns = extract_samples(noisy, w);
  std::vector<SamplePair> out(ns.size());
  for (std::size_t j = 0; j < ns.size(); ++j) {
    out[j].noisy = std::move(ns[j]);
    out[j].true_u = (*clean.u_ref)[j + static_cast<std::size_t>(w.p)];
    out[j].series_id = clean.series_id;
    out[j].k = static_cast<long>(j) + w.p;
  }
  return out;
}

/// Seeded random subsample keeping at most `cap` entries (0 = no cap).
inline std::vector<CalibrationSample> cap_samples(std::vector<CalibrationSample> samples,
                                                  std::size_t cap, std::uint64_t seed) {
  if (cap == 0 || samples.size() <= cap) return samples;
  std::mt19937_64 rng(seed);
  std::shuffle(samples.begin(), samples.end(), rng);
  samples.resize(cap);
  return samples;
}

namespace detail {

inline FoldResult run_fold(const std::vector<TimeSeries>& prepared, const CvConfig& cfg,
                           double snr_db, std::size_t snr_idx, int fold) {
  const std::uint64_t fold_seed = mix_seed(cfg.rng_seed, snr_idx * 1000003ULL + static_cast<std::uint64_t>(fold));
  FoldResult out;
  out.snr_db = snr_db;
  out.fold = fold;

  std::vector<CalibrationSample> train;
  std::vector<SamplePair> test;
  if (cfg.mode == SplitMode::by_series) {
    std::vector<std::string> ids;
    for (const auto& s : prepared) ids.push_back(s.series_id);
    const SeriesSplit split = split_by_series(ids, cfg.test_fraction, mix_seed(fold_seed, 1));
    out.train_ids = split.train_ids;
    for (std::size_t si = 0; si < prepared.size(); ++si) {
      const auto& s = prepared[si];
      const bool in_test = std::binary_search(split.test_ids.begin(), split.test_ids.end(), s.series_id);
      auto pairs = paired_samples(s, snr_db, mix_seed(fold_seed, 100 + si), cfg.window);
      if (in_test) {
        test.insert(test.end(), pairs.begin(), pairs.end());
      } else {
        for (auto& p : pairs) train.push_back(std::move(p.noisy));
      }
    }
  } else {
    std::vector<SamplePair> pool;
    for (std::size_t si = 0; si < prepared.size(); ++si) {
      auto pairs = paired_samples(prepared[si], snr_db, mix_seed(fold_seed, 100 + si), cfg.window);
      pool.insert(pool.end(), pairs.begin(), pairs.end());
    }
    if (pool.size() < 2) throw invalid_input("cross_validate: not enough samples");
    std::vector<std::size_t> order(pool.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(mix_seed(fold_seed, 2));
    std::shuffle(order.begin(), order.end(), rng);
    std::size_t n_test = static_cast<std::size_t>(
        std::llround(cfg.test_fraction * static_cast<double>(pool.size())));
    n_test = std::clamp<std::size_t>(n_test, 1, pool.size() - 1);
    for (std::size_t j = 0; j < order.size(); ++j) {
      if (j < n_test)
        test.push_back(pool[order[j]]);
      else
        train.push_back(std::move(pool[order[j]].noisy));
    }
  }

  train = cap_samples(std::move(train), cfg.max_train_samples, mix_seed(fold_seed, 3));
  if (train.size() < 2 || test.empty())
    throw invalid_input("cross_validate: degenerate fold (train or test side empty)");

  SearchConfig search = cfg.search;
  search.rng_seed = mix_seed(fold_seed, 4);
  search.n_threads = 1;
  const FitResult fitres = fit(train, search, cfg.norm);
  const SdcmModel model = build_model(std::move(train), fitres.theta, cfg.norm, cfg.window);
  out.theta = fitres.theta;
  out.log_likelihood = fitres.log_likelihood;

  out.records.reserve(test.size());
  for (const auto& p : test) {
    if (!(p.true_u > 0.0)) continue;
    out.records.push_back(make_error_record(p.series_id, p.k, p.noisy.z[p.noisy.z.size() - 1],
                                            p.true_u, predict(model, p.noisy.z).mean));
  }
  return out;
}

}  // namespace detail

inline CvResult cross_validate(const std::vector<TimeSeries>& clean_series, const CvConfig& cfg) {
  if (cfg.n_folds < 1) throw invalid_input("cross_validate: need at least one fold");
  if (cfg.snr_db_list.empty()) throw invalid_input("cross_validate: empty SNR list");
  if (clean_series.empty()) throw invalid_input("cross_validate: no series");
  for (const auto& s : clean_series) {
    validate(s);
    if (!s.has_reference())
      throw invalid_input("cross_validate: series '" + s.series_id + "' has no references");
  }

  std::vector<TimeSeries> prepared;
  prepared.reserve(clean_series.size());
  for (const auto& s : clean_series) prepared.push_back(downsample(s, cfg.downsample_factor));

  struct Task {
    double snr_db;
    std::size_t snr_idx;
    int fold;
  };
  std::vector<Task> tasks;
  for (std::size_t i = 0; i < cfg.snr_db_list.size(); ++i)
    for (int f = 0; f < cfg.n_folds; ++f) tasks.push_back({cfg.snr_db_list[i], i, f});

  CvResult out;
  out.folds.resize(tasks.size());
  parallel_for(tasks.size(), cfg.n_threads, [&](std::size_t i) {
    out.folds[i] = detail::run_fold(prepared, cfg, tasks[i].snr_db, tasks[i].snr_idx, tasks[i].fold);
  });

  for (std::size_t i = 0; i < cfg.snr_db_list.size(); ++i) {
    SnrAggregate agg;
    agg.snr_db = cfg.snr_db_list[i];
    std::vector<double> paes;
    std::vector<ErrorRecord> all;
    for (const auto& fr : out.folds) {
      if (fr.snr_db != agg.snr_db) continue;
      for (const auto& r : fr.records) {
        paes.push_back(r.pae);
        all.push_back(r);
      }
    }
    if (all.empty()) throw invalid_input("cross_validate: an SNR level produced no records");
    agg.n_records = static_cast<int>(all.size());
    double sum = 0.0;
    for (double v : paes) sum += v;
    agg.mean_pae = sum / static_cast<double>(paes.size());
    agg.pae_stats = boxplot_stats(paes);
    agg.iso = iso15197_check(all);
    out.aggregates.push_back(std::move(agg));
  }
  return out;
}

}  // namespace sdcm
