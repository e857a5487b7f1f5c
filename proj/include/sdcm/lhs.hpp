#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <numeric>
#include <random>
#include <utility>
#include <vector>

#include "sdcm/errors.hpp"

namespace sdcm {

/// Latin hypercube sample: n points over the given per-dimension ranges,
/// each range split into n equal subintervals holding exactly one coordinate.
/// Row i is one candidate point.
inline Eigen::MatrixXd latin_hypercube(int n_points,
                                       const std::vector<std::pair<double, double>>& ranges,
                                       std::mt19937_64& rng) {
  if (n_points < 1) throw invalid_input("latin_hypercube: need at least one point");
  for (const auto& [lo, hi] : ranges)
    if (!(lo < hi)) throw invalid_input("latin_hypercube: each range needs lo < hi");
  Eigen::MatrixXd pts(n_points, static_cast<Eigen::Index>(ranges.size()));
  std::vector<int> cells(static_cast<std::size_t>(n_points));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t d = 0; d < ranges.size(); ++d) {
    std::iota(cells.begin(), cells.end(), 0);
    std::shuffle(cells.begin(), cells.end(), rng);
    const double width = (ranges[d].second - ranges[d].first) / n_points;
    for (int i = 0; i < n_points; ++i)
      pts(i, static_cast<Eigen::Index>(d)) =
          ranges[d].first + (cells[static_cast<std::size_t>(i)] + unit(rng)) * width;
  }
  return pts;
}

}  // namespace sdcm
