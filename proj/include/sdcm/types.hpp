#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "sdcm/errors.hpp"

namespace sdcm {

/// Uniformly sampled record from one sensor deployment. Times are in seconds
/// since deployment, y is the raw sensor output, u_ref holds reference values
/// from an independent instrument when available (physical units, e.g. mg/dL).
struct TimeSeries {
  std::vector<double> t;
  std::vector<double> y;
  std::optional<std::vector<double>> u_ref;
  double sample_interval = 0.0;  // seconds
  std::string series_id;

  std::size_t size() const { return t.size(); }
  bool has_reference() const { return u_ref.has_value(); }
};

inline void validate(const TimeSeries& s) {
  if (s.y.size() != s.t.size())
    throw invalid_input("TimeSeries '" + s.series_id + "': t/y length mismatch");
  if (s.u_ref && s.u_ref->size() != s.t.size())
    throw invalid_input("TimeSeries '" + s.series_id + "': u_ref length mismatch");
  for (std::size_t k = 1; k < s.t.size(); ++k) {
    const double dt = s.t[k] - s.t[k - 1];
    if (!(dt > 0.0))
      throw invalid_input("TimeSeries '" + s.series_id + "': times not strictly increasing");
    if (std::abs(dt - s.sample_interval) > 1e-6 * std::abs(s.sample_interval))
      throw invalid_input("TimeSeries '" + s.series_id + "': non-uniform sampling at index " +
                          std::to_string(k));
  }
}

/// Number of past (p) and future (ell) measurements stacked around the
/// current one when forming a feature vector.
struct WindowSpec {
  int p = 6;
  int ell = 1;

  // total feature dimension: p past + current + ell future + elapsed time
  int feature_dim() const { return p + ell + 2; }
  int window_len() const { return p + ell + 1; }
};

inline void validate(const WindowSpec& w) {
  if (w.p < 0 || w.ell < 0) throw invalid_input("WindowSpec: p and ell must be non-negative");
}

/// One training pair: feature vector z = [y_{k-p} .. y_{k+ell}, t_k] in raw
/// units, and the noisy reference value u in physical units.
struct CalibrationSample {
  Eigen::VectorXd z;
  double u = 0.0;
};

}  // namespace sdcm
