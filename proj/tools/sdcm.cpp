// Command-line front end for the dynamic-calibration toolkit.
//
// Subcommands: simulate | train | predict | update | tune | evaluate.
// Precedence: defaults < command-line flags < --config JSON file.
// Exit codes: 0 success, 2 invalid input, 3 numerical failure, 4 I/O failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "sdcm/csv_io.hpp"
#include "sdcm/eval.hpp"
#include "sdcm/pipeline.hpp"
#include "sdcm/serialize.hpp"

namespace fs = std::filesystem;
using sdcm::json;

namespace {

/// Overwrites `value` when `doc[key]` is present: the JSON config wins over
/// command-line flags, which win over defaults.
template <typename T>
void override_from(const json& doc, const char* key, T& value) {
  if (doc.contains(key)) value = doc.at(key).get<T>();
}

json load_config_file(const std::string& path) {
  if (path.empty()) return json::object();
  return sdcm::read_json_file(path);
}

std::vector<sdcm::TimeSeries> load_series_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw sdcm::io_error("'" + dir.string() + "' is not a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".csv")
      files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw sdcm::io_error("no .csv series found in '" + dir.string() + "'");
  std::vector<sdcm::TimeSeries> out;
  out.reserve(files.size());
  for (const auto& f : files) out.push_back(sdcm::read_series_csv(f));
  return out;
}

std::vector<double> parse_snr_list(const std::vector<std::string>& items) {
  std::vector<double> out;
  for (const auto& s : items) {
    if (s == "inf" || s == "none") {
      out.push_back(std::numeric_limits<double>::infinity());
      continue;
    }
    try {
      out.push_back(std::stod(s));
    } catch (const std::exception&) {
      throw sdcm::invalid_input("bad SNR value '" + s + "'");
    }
  }
  return out;
}

json theta_json(const sdcm::Hyperparameters& t) {
  return {{"delta", t.delta}, {"sigma", t.sigma}, {"sigma_u_tilde", t.sigma_u_tilde}};
}

json update_config_json(const sdcm::UpdateConfig& c) {
  return {{"eps_u", c.eps_u}, {"c", c.c}, {"eps_gamma", c.eps_gamma}};
}

sdcm::UpdateConfig update_config_from_json(const json& doc) {
  return {doc.at("eps_u").get<double>(), doc.at("c").get<double>(),
          doc.at("eps_gamma").get<double>()};
}

/// Decimates an input series onto the model's grid and warns when the
/// resulting interval still disagrees with the one the model was trained on.
sdcm::TimeSeries align_to_model(const sdcm::TimeSeries& series, int downsample,
                                const sdcm::ModelArtifact& artifact) {
  sdcm::TimeSeries out = sdcm::downsample(series, downsample);
  if (artifact.sample_interval_s > 0.0 && out.size() >= 2 &&
      std::abs(out.sample_interval - artifact.sample_interval_s) >
          1e-6 * artifact.sample_interval_s) {
    std::cerr << "warning: input interval " << out.sample_interval
              << " s differs from the model's training grid of " << artifact.sample_interval_s
              << " s; consider --downsample\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// shared option blocks

struct TrainKnobs {
  int p = 6;
  int ell = 1;
  int downsample = 3;
  int trials = 20;
  int max_iterations = 200;
  std::uint64_t max_samples = 2000;
  double target_scale = 400.0;
  bool no_feature_normalization = false;
  bool uncentered = false;
  int threads = 0;
  double delta_init = 1.0, delta_lo = 1e-5, delta_hi = 1e4;
  double sigma_init = 1.0, sigma_lo = 1e-5, sigma_hi = 1e4;
  double sigma_u_init = 1e-3, sigma_u_lo = 1e-5, sigma_u_hi = 1e-1;
};

void add_train_knobs(CLI::App* cmd, TrainKnobs& k) {
  cmd->add_option("--p", k.p, "Past samples per window");
  cmd->add_option("--ell", k.ell, "Future samples per window");
  cmd->add_option("--downsample", k.downsample, "Decimation factor before windowing");
  cmd->add_option("--trials", k.trials, "Hyperparameter search restarts");
  cmd->add_option("--max-iterations", k.max_iterations, "Gradient-ascent iteration cap per trial");
  cmd->add_option("--max-samples", k.max_samples, "Training sample cap, 0 = unlimited");
  cmd->add_option("--target-scale", k.target_scale, "Reference units mapped to 1.0");
  cmd->add_flag("--no-feature-normalization", k.no_feature_normalization,
                "Disable per-dimension z-scoring of features");
  cmd->add_flag("--uncentered", k.uncentered, "Evaluate the likelihood on uncentered references");
  cmd->add_option("--threads", k.threads, "Worker threads, 0 = hardware");
  cmd->add_option("--delta-init", k.delta_init, "Length-scale initial guess");
  cmd->add_option("--delta-range", [&k](const std::vector<std::string>& v) {
    k.delta_lo = std::stod(v.at(0)); k.delta_hi = std::stod(v.at(1)); return true;
  }, "Length-scale search range")->expected(2);
  cmd->add_option("--sigma-init", k.sigma_init, "Amplitude initial guess");
  cmd->add_option("--sigma-range", [&k](const std::vector<std::string>& v) {
    k.sigma_lo = std::stod(v.at(0)); k.sigma_hi = std::stod(v.at(1)); return true;
  }, "Amplitude search range")->expected(2);
  cmd->add_option("--sigma-u-init", k.sigma_u_init, "Reference-noise initial guess");
  cmd->add_option("--sigma-u-range", [&k](const std::vector<std::string>& v) {
    k.sigma_u_lo = std::stod(v.at(0)); k.sigma_u_hi = std::stod(v.at(1)); return true;
  }, "Reference-noise search range")->expected(2);
}

void override_train_knobs(const json& doc, TrainKnobs& k) {
  override_from(doc, "p", k.p);
  override_from(doc, "ell", k.ell);
  override_from(doc, "downsample", k.downsample);
  override_from(doc, "trials", k.trials);
  override_from(doc, "max_iterations", k.max_iterations);
  override_from(doc, "max_samples", k.max_samples);
  override_from(doc, "target_scale", k.target_scale);
  override_from(doc, "no_feature_normalization", k.no_feature_normalization);
  override_from(doc, "uncentered", k.uncentered);
  override_from(doc, "threads", k.threads);
  if (doc.contains("delta")) {
    const json& d = doc.at("delta");
    override_from(d, "init", k.delta_init);
    override_from(d, "lo", k.delta_lo);
    override_from(d, "hi", k.delta_hi);
  }
  if (doc.contains("sigma")) {
    const json& d = doc.at("sigma");
    override_from(d, "init", k.sigma_init);
    override_from(d, "lo", k.sigma_lo);
    override_from(d, "hi", k.sigma_hi);
  }
  if (doc.contains("sigma_u")) {
    const json& d = doc.at("sigma_u");
    override_from(d, "init", k.sigma_u_init);
    override_from(d, "lo", k.sigma_u_lo);
    override_from(d, "hi", k.sigma_u_hi);
  }
}

json train_knobs_json(const TrainKnobs& k) {
  return {{"p", k.p},
          {"ell", k.ell},
          {"downsample", k.downsample},
          {"trials", k.trials},
          {"max_iterations", k.max_iterations},
          {"max_samples", k.max_samples},
          {"target_scale", k.target_scale},
          {"no_feature_normalization", k.no_feature_normalization},
          {"uncentered", k.uncentered},
          {"delta", {{"init", k.delta_init}, {"lo", k.delta_lo}, {"hi", k.delta_hi}}},
          {"sigma", {{"init", k.sigma_init}, {"lo", k.sigma_lo}, {"hi", k.sigma_hi}}},
          {"sigma_u", {{"init", k.sigma_u_init}, {"lo", k.sigma_u_lo}, {"hi", k.sigma_u_hi}}}};
}

sdcm::SearchConfig search_from_knobs(const TrainKnobs& k, std::uint64_t seed) {
  sdcm::SearchConfig s;
  s.n_trials = k.trials;
  s.max_iterations = k.max_iterations;
  s.rng_seed = seed;
  s.centered = !k.uncentered;
  s.n_threads = k.threads;
  s.delta = {k.delta_init, k.delta_lo, k.delta_hi};
  s.sigma = {k.sigma_init, k.sigma_lo, k.sigma_hi};
  s.sigma_u = {k.sigma_u_init, k.sigma_u_lo, k.sigma_u_hi};
  return s;
}

sdcm::NormalizationConfig norm_from_knobs(const TrainKnobs& k) {
  sdcm::NormalizationConfig n;
  n.normalize_features = !k.no_feature_normalization;
  n.target_scale = k.target_scale;
  return n;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateOptions {
  std::string out_dir;
  std::string config_file;
  int profiles = 20;
  double hours = 19.0;
  double interval_min = 3.0;
  std::uint64_t seed = 0;
  double state_decay = 0.8187;
  double input_gain = 163.1;
  double lifespan = 1140.0;
  double output_gain = 0.2;
  bool drift_minutes = false;
};

int run_simulate(SimulateOptions opt) {
  const json cfg_doc = load_config_file(opt.config_file);
  override_from(cfg_doc, "profiles", opt.profiles);
  override_from(cfg_doc, "hours", opt.hours);
  override_from(cfg_doc, "interval_min", opt.interval_min);
  override_from(cfg_doc, "seed", opt.seed);
  override_from(cfg_doc, "state_decay", opt.state_decay);
  override_from(cfg_doc, "input_gain", opt.input_gain);
  override_from(cfg_doc, "lifespan", opt.lifespan);
  override_from(cfg_doc, "output_gain", opt.output_gain);
  override_from(cfg_doc, "drift_minutes", opt.drift_minutes);

  sdcm::ScenarioConfig scenario;
  scenario.n_profiles = opt.profiles;
  scenario.duration_h = opt.hours;
  scenario.sample_interval_min = opt.interval_min;
  scenario.rng_seed = opt.seed;
  scenario.sensor.state_decay = opt.state_decay;
  scenario.sensor.input_gain = opt.input_gain;
  scenario.sensor.lifespan = opt.lifespan;
  scenario.sensor.output_gain = opt.output_gain;
  scenario.sensor.drift_time_in_minutes = opt.drift_minutes;

  const json canonical = {{"command", "simulate"},
                          {"profiles", opt.profiles},
                          {"hours", opt.hours},
                          {"interval_min", opt.interval_min},
                          {"seed", opt.seed},
                          {"state_decay", opt.state_decay},
                          {"input_gain", opt.input_gain},
                          {"lifespan", opt.lifespan},
                          {"output_gain", opt.output_gain},
                          {"drift_minutes", opt.drift_minutes}};

  fs::create_directories(opt.out_dir);
  const auto population = sdcm::simulate_population(scenario);
  if (population.series.empty())
    std::cerr << "warning: zero profiles requested; writing manifest only\n";
  if (population.clipped > 0)
    std::cerr << "warning: " << population.clipped
              << " profile samples clipped into the physiological band\n";

  json manifest;
  manifest["format"] = "sdcm-simulation-manifest";
  manifest["format_version"] = 1;
  manifest["config_hash"] = sdcm::config_hash(canonical);
  manifest["seed"] = opt.seed;
  manifest["clipped_samples"] = population.clipped;
  json files = json::array();
  for (const auto& s : population.series) {
    const fs::path file = fs::path(opt.out_dir) / (s.series_id + ".csv");
    sdcm::write_series_csv(file, s);
    files.push_back(file.filename().string());
  }
  manifest["files"] = files;
  sdcm::write_json_file(fs::path(opt.out_dir) / "manifest.json", manifest);
  std::cout << "wrote " << population.series.size() << " series to " << opt.out_dir << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainOptions {
  std::string data_dir;
  std::string out_file;
  std::string trial_log_file;
  std::string config_file;
  TrainKnobs knobs;
  double snr_db = 55.0;
  double test_fraction = 0.2;
  std::uint64_t seed = 0;
  double lifespan_s = 68400.0;
};

int run_train(TrainOptions opt) {
  const json cfg_doc = load_config_file(opt.config_file);
  override_train_knobs(cfg_doc, opt.knobs);
  override_from(cfg_doc, "snr_db", opt.snr_db);
  override_from(cfg_doc, "test_fraction", opt.test_fraction);
  override_from(cfg_doc, "seed", opt.seed);
  override_from(cfg_doc, "lifespan_s", opt.lifespan_s);

  json canonical = train_knobs_json(opt.knobs);
  canonical["command"] = "train";
  canonical["snr_db"] = std::isinf(opt.snr_db) ? json("inf") : json(opt.snr_db);
  canonical["test_fraction"] = opt.test_fraction;
  canonical["seed"] = opt.seed;

  sdcm::TrainPipelineConfig pipeline;
  pipeline.window = {opt.knobs.p, opt.knobs.ell};
  pipeline.downsample_factor = opt.knobs.downsample;
  pipeline.snr_db = opt.snr_db;
  pipeline.test_fraction = opt.test_fraction;
  pipeline.search = search_from_knobs(opt.knobs, 0);  // pipeline derives the trial seed
  pipeline.norm = norm_from_knobs(opt.knobs);
  pipeline.max_train_samples = opt.knobs.max_samples;
  pipeline.rng_seed = opt.seed;

  const auto series = load_series_dir(opt.data_dir);
  const auto result = sdcm::run_train_pipeline(series, pipeline);

  sdcm::ModelArtifact artifact;
  artifact.model = result.model;
  artifact.provenance = {sdcm::config_hash(canonical), opt.seed};
  artifact.train_series_ids = result.split.train_ids;
  artifact.test_series_ids = result.split.test_ids;
  artifact.lifespan_s = opt.lifespan_s;
  artifact.sample_interval_s = series.front().sample_interval * opt.knobs.downsample;
  sdcm::save_artifact(opt.out_file, artifact);

  if (!opt.trial_log_file.empty()) {
    json log;
    log["config_hash"] = artifact.provenance.config_hash;
    log["best"] = {{"theta", theta_json(result.fit.theta)},
                   {"log_likelihood", result.fit.log_likelihood}};
    json trials = json::array();
    for (const auto& t : result.fit.trials)
      trials.push_back({{"index", t.index},
                        {"start", theta_json(t.start)},
                        {"result", theta_json(t.result)},
                        {"log_likelihood", t.log_likelihood},
                        {"iterations", t.iterations},
                        {"converged", t.converged},
                        {"failed", t.failed}});
    log["trials"] = trials;
    sdcm::write_json_file(opt.trial_log_file, log);
  }

  std::cout << "trained on " << result.model.size() << " samples ("
            << result.split.train_ids.size() << " series), theta* = [delta "
            << result.fit.theta.delta << ", sigma " << result.fit.theta.sigma << ", sigma_u "
            << result.fit.theta.sigma_u_tilde << "], log-likelihood "
            << result.fit.log_likelihood << '\n';
  if (!result.test_records.empty()) {
    const auto iso = sdcm::iso15197_check(result.test_records);
    double max_pae = 0.0;
    for (const auto& r : result.test_records) max_pae = std::max(max_pae, r.pae);
    std::cout << "held-out check: " << result.test_records.size() << " records, max PAE "
              << max_pae << "%, ISO pass fraction " << iso.pass_fraction << '\n';
  }
  return 0;
}

// ---------------------------------------------------------------------------
// predict

struct PredictOptions {
  std::string model_file;
  std::string input_file;
  std::string out_file;
  int downsample = 1;
};

int run_predict(const PredictOptions& opt) {
  const auto artifact = sdcm::load_artifact(opt.model_file);
  const auto series = align_to_model(sdcm::read_series_csv(opt.input_file), opt.downsample, artifact);
  const auto& window = artifact.model.window;

  std::vector<sdcm::EstimateRow> rows;
  long beyond_lifespan = 0;
  if (series.size() < static_cast<std::size_t>(window.window_len())) {
    std::cerr << "notice: series shorter than the window (" << series.size() << " < "
              << window.window_len() << "); no estimates\n";
  } else {
    sdcm::TimeSeries windowable = series;
    if (!windowable.u_ref) {
      // references are not needed to predict; windowing requires the channel
      windowable.u_ref.emplace(windowable.size(), 0.0);
    }
    const auto samples = sdcm::extract_samples(windowable, window);
    rows.reserve(samples.size());
    for (std::size_t j = 0; j < samples.size(); ++j) {
      const auto est = sdcm::predict(artifact.model, samples[j].z);
      const double t = samples[j].z[samples[j].z.size() - 1];
      if (artifact.lifespan_s > 0.0 && t > artifact.lifespan_s) ++beyond_lifespan;
      rows.push_back({static_cast<long>(j) + window.p, t, est.mean, est.variance, est.confidence});
    }
  }
  if (beyond_lifespan > 0)
    std::cerr << "warning: " << beyond_lifespan << " estimates beyond the sensor lifespan of "
              << artifact.lifespan_s << " s\n";

  const long skipped = static_cast<long>(series.size()) - static_cast<long>(rows.size());
  sdcm::write_estimates_csv(
      opt.out_file, rows,
      {{"model_config_hash", artifact.provenance.config_hash},
       {"noncausal_lag_samples", std::to_string(window.ell)},
       {"window_p", std::to_string(window.p)},
       {"edge_rows_skipped", std::to_string(skipped)},
       {"beyond_lifespan_rows", std::to_string(beyond_lifespan)}});
  std::cout << "wrote " << rows.size() << " estimates to " << opt.out_file << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// update

struct UpdateOptions {
  std::string model_file;
  std::string stream_file;
  std::string out_file;
  std::string events_file;
  std::string params_file;
  double eps_u = 0.0684;
  double c = 0.7346;
  double eps_gamma = 6.3445;
  int downsample = 1;
};

int run_update(UpdateOptions opt) {
  sdcm::UpdateConfig cfg{opt.eps_u, opt.c, opt.eps_gamma};
  if (!opt.params_file.empty()) {
    const json doc = sdcm::read_json_file(opt.params_file);
    cfg = update_config_from_json(doc.contains("best") ? doc.at("best") : doc);
  }
  validate(cfg);

  auto artifact = sdcm::load_artifact(opt.model_file);
  const auto stream =
      align_to_model(sdcm::read_series_csv(opt.stream_file), opt.downsample, artifact);
  const auto samples = sdcm::extract_samples(stream, artifact.model.window);

  std::vector<sdcm::UpdateEvent> events;
  events.reserve(samples.size());
  int applied = 0;
  sdcm::SdcmModel current = artifact.model;
  for (const auto& s : samples) {
    auto r = sdcm::update_step(current, s, cfg);
    events.push_back(r.event);
    if (r.model) {
      current = std::move(*r.model);
      ++applied;
    }
  }
  artifact.model = std::move(current);
  sdcm::save_artifact(opt.out_file, artifact);
  if (!opt.events_file.empty()) sdcm::write_events_jsonl(opt.events_file, events);
  std::cout << "applied " << applied << " of " << samples.size() << " samples ("
            << samples.size() - static_cast<std::size_t>(applied) << " outlier alerts)\n";
  return 0;
}

// ---------------------------------------------------------------------------
// tune

struct TuneOptions {
  std::string model_file;
  std::string series_file;
  std::string out_file;
  int candidates = 6;
  double split_hours = 9.0;
  std::uint64_t seed = 0;
  int threads = 0;
  int downsample = 1;
};

int run_tune(const TuneOptions& opt) {
  const auto artifact = sdcm::load_artifact(opt.model_file);
  const auto series =
      align_to_model(sdcm::read_series_csv(opt.series_file), opt.downsample, artifact);
  sdcm::TuneConfig cfg;
  cfg.n_candidates = opt.candidates;
  cfg.split_time_s = opt.split_hours * 3600.0;
  cfg.rng_seed = opt.seed;
  cfg.n_threads = opt.threads;
  const auto result = sdcm::tune_update_params(artifact.model, series, cfg);

  json doc;
  doc["format"] = "sdcm-update-params";
  doc["format_version"] = 1;
  doc["seed"] = opt.seed;
  doc["split_hours"] = opt.split_hours;
  doc["best"] = update_config_json(result.best);
  json candidates = json::array();
  for (const auto& c : result.candidates)
    candidates.push_back({{"config", update_config_json(c.config)},
                          {"mean_pae", c.mean_pae},
                          {"updates", c.updates},
                          {"outliers", c.outliers},
                          {"scored", c.scored}});
  doc["candidates"] = candidates;
  sdcm::write_json_file(opt.out_file, doc);
  std::cout << "best (eps_u, c, eps_gamma) = (" << result.best.eps_u << ", " << result.best.c
            << ", " << result.best.eps_gamma << ")\n";
  return 0;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateCvOptions {
  std::string data_dir;
  std::string out_dir;
  std::string config_file;
  TrainKnobs knobs;
  int folds = 10;
  std::vector<std::string> snr_items{"55"};
  std::string mode = "series";
  double test_fraction = 0.2;
  std::uint64_t seed = 0;
};

int run_evaluate_cv(EvaluateCvOptions opt) {
  const json cfg_doc = load_config_file(opt.config_file);
  override_train_knobs(cfg_doc, opt.knobs);
  override_from(cfg_doc, "folds", opt.folds);
  override_from(cfg_doc, "snr_db", opt.snr_items);
  override_from(cfg_doc, "mode", opt.mode);
  override_from(cfg_doc, "test_fraction", opt.test_fraction);
  override_from(cfg_doc, "seed", opt.seed);

  if (opt.mode != "series" && opt.mode != "sample")
    throw sdcm::invalid_input("evaluate cv: mode must be 'series' or 'sample'");

  sdcm::CvConfig cv;
  cv.n_folds = opt.folds;
  cv.mode = opt.mode == "series" ? sdcm::SplitMode::by_series : sdcm::SplitMode::by_sample;
  cv.test_fraction = opt.test_fraction;
  cv.snr_db_list = parse_snr_list(opt.snr_items);
  cv.window = {opt.knobs.p, opt.knobs.ell};
  cv.downsample_factor = opt.knobs.downsample;
  cv.search = search_from_knobs(opt.knobs, 0);
  cv.norm = norm_from_knobs(opt.knobs);
  cv.max_train_samples = opt.knobs.max_samples;
  cv.rng_seed = opt.seed;
  cv.n_threads = opt.knobs.threads;

  json canonical = train_knobs_json(opt.knobs);
  canonical["command"] = "evaluate-cv";
  canonical["folds"] = opt.folds;
  canonical["snr"] = opt.snr_items;
  canonical["mode"] = opt.mode;
  canonical["test_fraction"] = opt.test_fraction;
  canonical["seed"] = opt.seed;
  const std::string hash = sdcm::config_hash(canonical);

  const auto series = load_series_dir(opt.data_dir);
  const auto result = sdcm::cross_validate(series, cv);

  fs::create_directories(opt.out_dir);
  std::vector<sdcm::ErrorRecord> all_records;
  json folds = json::array();
  for (const auto& f : result.folds) {
    all_records.insert(all_records.end(), f.records.begin(), f.records.end());
    folds.push_back({{"snr_db", std::isinf(f.snr_db) ? json("inf") : json(f.snr_db)},
                     {"fold", f.fold},
                     {"n_records", f.records.size()},
                     {"theta", theta_json(f.theta)},
                     {"log_likelihood", f.log_likelihood}});
  }
  sdcm::write_records_csv(fs::path(opt.out_dir) / "records.csv", all_records);

  json summary;
  summary["format"] = "sdcm-cv-summary";
  summary["format_version"] = 1;
  summary["config_hash"] = hash;
  summary["seed"] = opt.seed;
  summary["folds"] = folds;
  json aggregates = json::array();
  for (const auto& a : result.aggregates) aggregates.push_back(sdcm::aggregate_to_json(a));
  summary["per_snr"] = aggregates;
  sdcm::write_json_file(fs::path(opt.out_dir) / "summary.json", summary);

  for (const auto& a : result.aggregates)
    std::cout << "snr " << a.snr_db << " dB: median PAE " << a.pae_stats.median << "%, mean "
              << a.mean_pae << "%, ISO pass fraction " << a.iso.pass_fraction << '\n';
  return 0;
}

struct EvaluateUpdateOptions {
  std::string model_file;
  std::string tune_series_file;
  std::string eval_series_file;
  std::string truth_series_file;
  std::string out_dir;
  double split_hours = 9.0;
  int candidates = 6;
  std::uint64_t seed = 0;
  int downsample = 1;
};

int run_evaluate_update(const EvaluateUpdateOptions& opt) {
  const auto artifact = sdcm::load_artifact(opt.model_file);
  const auto tune_series =
      align_to_model(sdcm::read_series_csv(opt.tune_series_file), opt.downsample, artifact);
  const auto eval_series =
      align_to_model(sdcm::read_series_csv(opt.eval_series_file), opt.downsample, artifact);
  const auto truth_series =
      opt.truth_series_file.empty()
          ? eval_series
          : align_to_model(sdcm::read_series_csv(opt.truth_series_file), opt.downsample, artifact);

  sdcm::TuneConfig tune_cfg;
  tune_cfg.n_candidates = opt.candidates;
  tune_cfg.split_time_s = opt.split_hours * 3600.0;
  tune_cfg.rng_seed = opt.seed;
  const auto tuned = sdcm::tune_update_params(artifact.model, tune_series, tune_cfg);

  const auto cmp = sdcm::compare_update_benefit(artifact.model, eval_series, truth_series,
                                                tuned.best, tune_cfg.split_time_s);

  fs::create_directories(opt.out_dir);
  sdcm::write_records_csv(fs::path(opt.out_dir) / "records_with_update.csv", cmp.records_with);
  sdcm::write_records_csv(fs::path(opt.out_dir) / "records_without_update.csv",
                          cmp.records_without);
  sdcm::write_events_jsonl(fs::path(opt.out_dir) / "update_events.jsonl", cmp.events);

  std::vector<double> pae_with, pae_without;
  for (const auto& r : cmp.records_with) pae_with.push_back(r.pae);
  for (const auto& r : cmp.records_without) pae_without.push_back(r.pae);

  json summary;
  summary["format"] = "sdcm-update-benefit-summary";
  summary["format_version"] = 1;
  summary["seed"] = opt.seed;
  summary["tuned"] = update_config_json(tuned.best);
  summary["with_update"] = {{"mean_pae", cmp.mean_pae_with},
                            {"pae", sdcm::boxplot_to_json(sdcm::boxplot_stats(pae_with))},
                            {"n_records", cmp.records_with.size()}};
  summary["without_update"] = {{"mean_pae", cmp.mean_pae_without},
                               {"pae", sdcm::boxplot_to_json(sdcm::boxplot_stats(pae_without))},
                               {"n_records", cmp.records_without.size()}};
  summary["updates_applied"] = cmp.updates_applied;
  summary["outliers_flagged"] = cmp.outliers_flagged;
  sdcm::write_json_file(fs::path(opt.out_dir) / "summary.json", summary);

  std::cout << "mean PAE with updates " << cmp.mean_pae_with << "%, without "
            << cmp.mean_pae_without << "% (" << cmp.updates_applied << " updates, "
            << cmp.outliers_flagged << " outlier alerts)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dynamic sensor calibration toolkit"};
  app.require_subcommand(1);

  SimulateOptions sim;
  auto* cmd_sim = app.add_subcommand("simulate", "Generate synthetic sensor deployments");
  cmd_sim->add_option("--out", sim.out_dir, "Output directory")->required();
  cmd_sim->add_option("--config", sim.config_file, "JSON config (overrides flags)");
  cmd_sim->add_option("--profiles", sim.profiles, "Number of simulated deployments");
  cmd_sim->add_option("--hours", sim.hours, "Deployment duration in hours");
  cmd_sim->add_option("--interval-min", sim.interval_min, "Sample interval in minutes");
  cmd_sim->add_option("--seed", sim.seed, "RNG seed");
  cmd_sim->add_option("--state-decay", sim.state_decay, "Sensor state decay per step");
  cmd_sim->add_option("--input-gain", sim.input_gain, "Sensor input gain");
  cmd_sim->add_option("--lifespan", sim.lifespan, "Sensor lifespan constant");
  cmd_sim->add_option("--output-gain", sim.output_gain, "Sensor output gain");
  cmd_sim->add_flag("--drift-minutes", sim.drift_minutes,
                    "Interpret drift time in minutes (flattens the drift)");

  TrainOptions train;
  auto* cmd_train = app.add_subcommand("train", "Fit a calibration map from series CSVs");
  cmd_train->add_option("--data", train.data_dir, "Directory of series CSVs")->required();
  cmd_train->add_option("--out", train.out_file, "Model artifact path")->required();
  cmd_train->add_option("--trial-log", train.trial_log_file, "Optional per-trial log JSON");
  cmd_train->add_option("--config", train.config_file, "JSON config (overrides flags)");
  cmd_train->add_option("--snr", train.snr_db, "Reference-noise SNR in dB (inf = clean)");
  cmd_train->add_option("--test-fraction", train.test_fraction, "Held-out series fraction");
  cmd_train->add_option("--seed", train.seed, "RNG seed");
  cmd_train->add_option("--lifespan-s", train.lifespan_s, "Sensor lifespan in seconds (metadata)");
  add_train_knobs(cmd_train, train.knobs);

  PredictOptions pred;
  auto* cmd_pred = app.add_subcommand("predict", "Stream estimates for a series");
  cmd_pred->add_option("--model", pred.model_file, "Model artifact")->required();
  cmd_pred->add_option("--input", pred.input_file, "Series CSV")->required();
  cmd_pred->add_option("--out", pred.out_file, "Estimates CSV")->required();
  cmd_pred->add_option("--downsample", pred.downsample, "Decimate the input onto the model grid");

  UpdateOptions upd;
  auto* cmd_upd = app.add_subcommand("update", "Replay an online-update stream");
  cmd_upd->add_option("--model", upd.model_file, "Model artifact")->required();
  cmd_upd->add_option("--stream", upd.stream_file, "Series CSV with references")->required();
  cmd_upd->add_option("--out", upd.out_file, "Updated artifact path")->required();
  cmd_upd->add_option("--events", upd.events_file, "Event log (JSON lines)");
  cmd_upd->add_option("--params", upd.params_file, "Tuned parameter JSON from 'tune'");
  cmd_upd->add_option("--eps-u", upd.eps_u, "Outlier threshold");
  cmd_upd->add_option("--c", upd.c, "Similarity decay rate");
  cmd_upd->add_option("--eps-gamma", upd.eps_gamma, "Confidence threshold");
  cmd_upd->add_option("--downsample", upd.downsample, "Decimate the input onto the model grid");

  TuneOptions tune;
  auto* cmd_tune = app.add_subcommand("tune", "Latin-hypercube search for update thresholds");
  cmd_tune->add_option("--model", tune.model_file, "Model artifact")->required();
  cmd_tune->add_option("--series", tune.series_file, "Tuning series CSV")->required();
  cmd_tune->add_option("--out", tune.out_file, "Chosen parameters JSON")->required();
  cmd_tune->add_option("--candidates", tune.candidates, "Number of LHS candidates");
  cmd_tune->add_option("--split-hours", tune.split_hours, "Update/score split point");
  cmd_tune->add_option("--seed", tune.seed, "RNG seed");
  cmd_tune->add_option("--threads", tune.threads, "Worker threads, 0 = hardware");
  cmd_tune->add_option("--downsample", tune.downsample, "Decimate the input onto the model grid");

  auto* cmd_eval = app.add_subcommand("evaluate", "Experiment harnesses");
  cmd_eval->require_subcommand(1);

  EvaluateCvOptions cv;
  auto* cmd_cv = cmd_eval->add_subcommand("cv", "Randomized cross-validation, optionally over SNRs");
  cmd_cv->add_option("--data", cv.data_dir, "Directory of series CSVs")->required();
  cmd_cv->add_option("--out-dir", cv.out_dir, "Metrics output directory")->required();
  cmd_cv->add_option("--config", cv.config_file, "JSON config (overrides flags)");
  cmd_cv->add_option("--folds", cv.folds, "Number of random resplits");
  cmd_cv->add_option("--snr", cv.snr_items, "SNR levels in dB ('inf' = clean)");
  cmd_cv->add_option("--mode", cv.mode, "Split mode: series | sample");
  cmd_cv->add_option("--test-fraction", cv.test_fraction, "Held-out fraction");
  cmd_cv->add_option("--seed", cv.seed, "RNG seed");
  add_train_knobs(cmd_cv, cv.knobs);

  EvaluateUpdateOptions up;
  auto* cmd_up = cmd_eval->add_subcommand("update-compare",
                                          "Score the online update against a frozen model");
  cmd_up->add_option("--model", up.model_file, "Model artifact")->required();
  cmd_up->add_option("--tune-series", up.tune_series_file, "Series for threshold tuning")
      ->required();
  cmd_up->add_option("--eval-series", up.eval_series_file, "Series the updates replay over")
      ->required();
  cmd_up->add_option("--truth-series", up.truth_series_file,
                     "Clean-reference series for scoring (defaults to eval series)");
  cmd_up->add_option("--out-dir", up.out_dir, "Metrics output directory")->required();
  cmd_up->add_option("--split-hours", up.split_hours, "Update/score split point");
  cmd_up->add_option("--candidates", up.candidates, "Number of LHS candidates");
  cmd_up->add_option("--seed", up.seed, "RNG seed");
  cmd_up->add_option("--downsample", up.downsample, "Decimate the inputs onto the model grid");

  try {
    app.parse(argc, argv);
    if (cmd_sim->parsed()) return run_simulate(sim);
    if (cmd_train->parsed()) return run_train(train);
    if (cmd_pred->parsed()) return run_predict(pred);
    if (cmd_upd->parsed()) return run_update(upd);
    if (cmd_tune->parsed()) return run_tune(tune);
    if (cmd_eval->parsed()) {
      if (cmd_cv->parsed()) return run_evaluate_cv(cv);
      if (cmd_up->parsed()) return run_evaluate_update(up);
    }
    return 0;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // usage problems are invalid input
  } catch (const sdcm::invalid_input& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const sdcm::numerical_error& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 3;
  } catch (const sdcm::io_error& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return 4;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
