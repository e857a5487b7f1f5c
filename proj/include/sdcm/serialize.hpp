#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sdcm/csv_io.hpp"
#include "sdcm/errors.hpp"
#include "sdcm/eval.hpp"
#include "sdcm/model.hpp"
#include "sdcm/online_update.hpp"

namespace sdcm {

using json = nlohmann::json;

inline constexpr int kArtifactFormatVersion = 1;

/// FNV-1a over a canonical JSON dump; stamped into every output for
/// provenance.
inline std::string config_hash(const json& config) {
  const std::string dump = config.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : dump) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

struct Provenance {
  std::string config_hash;
  std::uint64_t rng_seed = 0;
};

struct ModelArtifact {
  SdcmModel model;
  Provenance provenance;
  std::vector<std::string> train_series_ids;
  std::vector<std::string> test_series_ids;
  double lifespan_s = 0.0;         // 0 = unknown; queries past it only warn
  double sample_interval_s = 0.0;  // training grid after downsampling; 0 = unknown
};

namespace detail {

inline json vector_to_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

inline Eigen::VectorXd vector_from_json(const json& arr) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(arr.size()));
  for (std::size_t i = 0; i < arr.size(); ++i) v[static_cast<Eigen::Index>(i)] = arr[i].get<double>();
  return v;
}

}  // namespace detail

/// Versioned structured-text model artifact. The Cholesky factor is never
/// serialized; loading rebuilds it from the stored dataset, frozen feature
/// statistics and hyperparameters, so a loaded model predicts identically to
/// the saved one.
inline void save_artifact(const std::filesystem::path& path, const ModelArtifact& a) {
  const SdcmModel& m = a.model;
  json doc;
  doc["format"] = "sdcm-model";
  doc["format_version"] = kArtifactFormatVersion;
  doc["provenance"] = {{"config_hash", a.provenance.config_hash}, {"rng_seed", a.provenance.rng_seed}};
  doc["window"] = {{"p", m.window.p}, {"ell", m.window.ell}};
  doc["theta"] = {{"delta", m.theta.delta},
                  {"sigma", m.theta.sigma},
                  {"sigma_u_tilde", m.theta.sigma_u_tilde}};
  doc["normalization"] = {{"normalize_features", m.norm.normalize_features},
                          {"target_scale", m.norm.target_scale},
                          {"feature_mean", detail::vector_to_json(m.stats.mean)},
                          {"feature_std", detail::vector_to_json(m.stats.std)}};
  doc["mu"] = m.mu;
  doc["lifespan_s"] = a.lifespan_s;
  doc["sample_interval_s"] = a.sample_interval_s;
  doc["train_series_ids"] = a.train_series_ids;
  doc["test_series_ids"] = a.test_series_ids;
  json features = json::array();
  json refs = json::array();
  for (const auto& s : m.dataset) {
    features.push_back(detail::vector_to_json(s.z));
    refs.push_back(s.u);
  }
  doc["dataset"] = {{"features", features}, {"references", refs}};

  std::ofstream out(path);
  if (!out) throw io_error("cannot write '" + path.string() + "'");
  out << doc.dump(1) << '\n';
  if (!out) throw io_error("write failed for '" + path.string() + "'");
}

inline ModelArtifact load_artifact(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open '" + path.string() + "'");
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw io_error("malformed artifact '" + path.string() + "': " + e.what());
  }
  try {
    if (doc.at("format").get<std::string>() != "sdcm-model")
      throw io_error("'" + path.string() + "' is not a model artifact");
    if (doc.at("format_version").get<int>() != kArtifactFormatVersion)
      throw io_error("unsupported artifact version in '" + path.string() + "'");

    ModelArtifact a;
    a.provenance.config_hash = doc.at("provenance").at("config_hash").get<std::string>();
    a.provenance.rng_seed = doc.at("provenance").at("rng_seed").get<std::uint64_t>();
    a.lifespan_s = doc.value("lifespan_s", 0.0);
    a.sample_interval_s = doc.value("sample_interval_s", 0.0);
    a.train_series_ids = doc.value("train_series_ids", std::vector<std::string>{});
    a.test_series_ids = doc.value("test_series_ids", std::vector<std::string>{});

    WindowSpec window{doc.at("window").at("p").get<int>(), doc.at("window").at("ell").get<int>()};
    Hyperparameters theta{doc.at("theta").at("delta").get<double>(),
                          doc.at("theta").at("sigma").get<double>(),
                          doc.at("theta").at("sigma_u_tilde").get<double>()};
    const json& norm_doc = doc.at("normalization");
    NormalizationConfig norm;
    norm.normalize_features = norm_doc.at("normalize_features").get<bool>();
    norm.target_scale = norm_doc.at("target_scale").get<double>();
    FeatureStats stats;
    stats.mean = detail::vector_from_json(norm_doc.at("feature_mean"));
    stats.std = detail::vector_from_json(norm_doc.at("feature_std"));

    const json& ds = doc.at("dataset");
    const json& features = ds.at("features");
    const json& refs = ds.at("references");
    if (features.size() != refs.size())
      throw io_error("artifact dataset features/references length mismatch");
    std::vector<CalibrationSample> samples(features.size());
    for (std::size_t i = 0; i < features.size(); ++i) {
      samples[i].z = detail::vector_from_json(features[i]);
      samples[i].u = refs[i].get<double>();
    }
    a.model = assemble_model(std::move(samples), theta, norm, window, stats);
    return a;
  } catch (const json::exception& e) {
    throw io_error("malformed artifact '" + path.string() + "': " + e.what());
  }
}

// --- Online-update event log (JSON lines) -----------------------------------

inline json event_to_json(const UpdateEvent& e) {
  json doc;
  doc["t_s"] = e.t_s;
  doc["decision"] = e.decision;
  doc["residual"] = e.residual;
  if (std::isfinite(e.gamma))
    doc["gamma"] = e.gamma;
  else
    doc["gamma"] = std::isnan(e.gamma) ? "nan" : "inf";
  doc["replaced_index"] = e.replaced_index;
  doc["config"] = {{"eps_u", e.config.eps_u}, {"c", e.config.c}, {"eps_gamma", e.config.eps_gamma}};
  return doc;
}

inline UpdateEvent event_from_json(const json& doc) {
  UpdateEvent e;
  e.t_s = doc.at("t_s").get<double>();
  e.decision = doc.at("decision").get<std::string>();
  e.residual = doc.at("residual").get<double>();
  if (doc.at("gamma").is_string())
    e.gamma = doc.at("gamma").get<std::string>() == "inf"
                  ? std::numeric_limits<double>::infinity()
                  : std::numeric_limits<double>::quiet_NaN();
  else
    e.gamma = doc.at("gamma").get<double>();
  e.replaced_index = doc.at("replaced_index").get<long>();
  e.config.eps_u = doc.at("config").at("eps_u").get<double>();
  e.config.c = doc.at("config").at("c").get<double>();
  e.config.eps_gamma = doc.at("config").at("eps_gamma").get<double>();
  return e;
}

inline void write_events_jsonl(const std::filesystem::path& path,
                               const std::vector<UpdateEvent>& events) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write '" + path.string() + "'");
  for (const auto& e : events) out << event_to_json(e).dump() << '\n';
  if (!out) throw io_error("write failed for '" + path.string() + "'");
}

inline std::vector<UpdateEvent> read_events_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open '" + path.string() + "'");
  std::vector<UpdateEvent> events;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      events.push_back(event_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw io_error("bad event at " + path.string() + ":" + std::to_string(lineno) + ": " +
                     e.what());
    }
  }
  return events;
}

// --- Metrics files -----------------------------------------------------------

inline void write_records_csv(const std::filesystem::path& path,
                              const std::vector<ErrorRecord>& records) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write '" + path.string() + "'");
  out << "series_id,k,t_s,true_u,est_u,abs_err,pae\n";
  for (const auto& r : records)
    out << r.series_id << ',' << r.k << ',' << format_double(r.t_s) << ','
        << format_double(r.true_u) << ',' << format_double(r.est_u) << ','
        << format_double(r.abs_err) << ',' << format_double(r.pae) << '\n';
  if (!out) throw io_error("write failed for '" + path.string() + "'");
}

inline json boxplot_to_json(const BoxplotStats& s) {
  return {{"median", s.median},       {"q1", s.q1},
          {"q3", s.q3},               {"iqr", s.iqr},
          {"whisker_lo", s.whisker_lo}, {"whisker_hi", s.whisker_hi},
          {"n_outliers", s.outliers.size()}};
}

inline json aggregate_to_json(const SnrAggregate& a) {
  json doc = {{"snr_db", std::isinf(a.snr_db) ? json("inf") : json(a.snr_db)},
              {"n_records", a.n_records},
              {"mean_pae", a.mean_pae},
              {"pae", boxplot_to_json(a.pae_stats)},
              {"iso15197", {{"pass_fraction", a.iso.pass_fraction}, {"pass", a.iso.pass}}}};
  return doc;
}

inline void write_json_file(const std::filesystem::path& path, const json& doc) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write '" + path.string() + "'");
  out << doc.dump(1) << '\n';
  if (!out) throw io_error("write failed for '" + path.string() + "'");
}

inline json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open '" + path.string() + "'");
  try {
    json doc;
    in >> doc;
    return doc;
  } catch (const json::exception& e) {
    throw io_error("malformed JSON in '" + path.string() + "': " + e.what());
  }
}

}  // namespace sdcm
