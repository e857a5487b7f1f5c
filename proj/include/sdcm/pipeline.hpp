#pragma once

// End-to-end experiment plumbing shared by the command-line tool and the
// acceptance scenarios: population simulation, the train pipeline
// (downsample -> inject noise -> split -> window -> fit -> build), and the
// with/without-update comparison.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include "sdcm/eval.hpp"
#include "sdcm/hyperopt.hpp"
#include "sdcm/model.hpp"
#include "sdcm/online_update.hpp"
#include "sdcm/rng.hpp"
#include "sdcm/sensor_sim.hpp"
#include "sdcm/windowing.hpp"

namespace sdcm {

struct ScenarioConfig {
  int n_profiles = 20;
  double duration_h = 19.0;
  double sample_interval_min = 3.0;
  SensorModel sensor;
  std::uint64_t rng_seed = 0;
};

struct SimulatedPopulation {
  std::vector<TimeSeries> series;  // clean references
  int clipped = 0;
};

/// Draws a profile population and runs each profile through the sensor.
/// Series ids are patient_00, patient_01, ...
inline SimulatedPopulation simulate_population(const ScenarioConfig& cfg) {
  validate(cfg.sensor);
  if (cfg.n_profiles < 0) throw invalid_input("simulate_population: negative profile count");
  const double interval_s = cfg.sample_interval_min * 60.0;
  const auto specs =
      sample_population(cfg.n_profiles, cfg.rng_seed, cfg.duration_h * 3600.0, interval_s);
  SimulatedPopulation out;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const GeneratedProfile prof = generate_profile(specs[i]);
    out.clipped += prof.clipped;
    char id[16];
    std::snprintf(id, sizeof(id), "patient_%02zu", i);
    out.series.push_back(simulate_series(cfg.sensor, prof.u, interval_s, id));
  }
  return out;
}

struct TrainPipelineConfig {
  WindowSpec window{6, 1};
  int downsample_factor = 3;
  double snr_db = 55.0;
  double test_fraction = 0.2;
  SearchConfig search;
  NormalizationConfig norm;
  std::size_t max_train_samples = 2000;
  std::uint64_t rng_seed = 0;
};

struct TrainOutput {
  SdcmModel model;
  FitResult fit;
  SeriesSplit split;
  std::vector<SamplePair> test_pairs;      // held-out samples with clean truth
  std::vector<ErrorRecord> test_records;   // scored against the clean truth
};

/// The full calibration-training pipeline over a set of clean reference
/// series. Reference noise is injected per series at the configured SNR
/// (training side only; test records keep the clean truth).
inline TrainOutput run_train_pipeline(const std::vector<TimeSeries>& clean_series,
                                      const TrainPipelineConfig& cfg) {
  if (clean_series.size() < 2)
    throw invalid_input("run_train_pipeline: need at least 2 series to split");
  for (const auto& s : clean_series) {
    validate(s);
    if (!s.has_reference())
      throw invalid_input("run_train_pipeline: series '" + s.series_id + "' has no references");
  }

  TrainOutput out;
  std::vector<TimeSeries> prepared;
  std::vector<std::string> ids;
  prepared.reserve(clean_series.size());
  for (const auto& s : clean_series) {
    prepared.push_back(downsample(s, cfg.downsample_factor));
    ids.push_back(s.series_id);
  }
  out.split = split_by_series(ids, cfg.test_fraction, mix_seed(cfg.rng_seed, 1));

  std::vector<CalibrationSample> train;
  for (std::size_t si = 0; si < prepared.size(); ++si) {
    const auto& s = prepared[si];
    auto pairs = paired_samples(s, cfg.snr_db, mix_seed(cfg.rng_seed, 100 + si), cfg.window);
    if (std::binary_search(out.split.test_ids.begin(), out.split.test_ids.end(), s.series_id)) {
      out.test_pairs.insert(out.test_pairs.end(), pairs.begin(), pairs.end());
    } else {
      for (auto& p : pairs) train.push_back(std::move(p.noisy));
    }
  }
  train = cap_samples(std::move(train), cfg.max_train_samples, mix_seed(cfg.rng_seed, 3));
  if (train.size() < 2) throw invalid_input("run_train_pipeline: training side is empty");

  SearchConfig search = cfg.search;
  search.rng_seed = mix_seed(cfg.rng_seed, 4);
  out.fit = fit(train, search, cfg.norm);
  out.model = build_model(std::move(train), out.fit.theta, cfg.norm, cfg.window);

  out.test_records.reserve(out.test_pairs.size());
  for (const auto& p : out.test_pairs) {
    if (!(p.true_u > 0.0)) continue;
    out.test_records.push_back(make_error_record(p.series_id, p.k, p.noisy.z[p.noisy.z.size() - 1],
                                                 p.true_u, predict(out.model, p.noisy.z).mean));
  }
  return out;
}

struct UpdateComparison {
  double mean_pae_with = 0.0;
  double mean_pae_without = 0.0;
  int updates_applied = 0;
  int outliers_flagged = 0;
  std::vector<UpdateEvent> events;
  std::vector<ErrorRecord> records_with;
  std::vector<ErrorRecord> records_without;
};

/// Replays the online-update loop over the stream's pre-split samples, then
/// scores the final updated model against the frozen original on the
/// post-split segment. `stream` carries the references the updates consume
/// (typically noisy); `truth` carries the scoring references on the same
/// grid (clean where available).
inline UpdateComparison compare_update_benefit(const SdcmModel& model, const TimeSeries& stream,
                                               const TimeSeries& truth, const UpdateConfig& cfg,
                                               double split_time_s) {
  validate(stream);
  validate(truth);
  if (stream.size() != truth.size() || stream.y != truth.y)
    throw invalid_input("compare_update_benefit: stream and truth series disagree");

  const auto stream_samples = extract_samples(stream, model.window);
  const auto truth_samples = extract_samples(truth, model.window);

  UpdateComparison out;
  SdcmModel updated = model;
  for (const auto& s : stream_samples) {
    if (s.z[s.z.size() - 1] > split_time_s) continue;
    UpdateResult r = update_step(updated, s, cfg);
    out.events.push_back(r.event);
    if (r.model) {
      updated = std::move(*r.model);
      ++out.updates_applied;
    } else {
      ++out.outliers_flagged;
    }
  }

  double sum_with = 0.0, sum_without = 0.0;
  for (std::size_t j = 0; j < truth_samples.size(); ++j) {
    const auto& s = truth_samples[j];
    const double t = s.z[s.z.size() - 1];
    if (t <= split_time_s || !(s.u > 0.0)) continue;
    const long k = static_cast<long>(j) + model.window.p;
    auto rec_with = make_error_record(truth.series_id, k, t, s.u, predict(updated, s.z).mean);
    auto rec_without = make_error_record(truth.series_id, k, t, s.u, predict(model, s.z).mean);
    sum_with += rec_with.pae;
    sum_without += rec_without.pae;
    out.records_with.push_back(std::move(rec_with));
    out.records_without.push_back(std::move(rec_without));
  }
  if (out.records_with.empty())
    throw invalid_input("compare_update_benefit: no scoring samples past the split time");
  out.mean_pae_with = sum_with / static_cast<double>(out.records_with.size());
  out.mean_pae_without = sum_without / static_cast<double>(out.records_without.size());
  return out;
}

}  // namespace sdcm
