#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <random>

#include "sdcm/eval.hpp"
#include "sdcm/sensor_sim.hpp"

using Catch::Approx;
using sdcm::ErrorRecord;

namespace {

ErrorRecord rec(double true_u, double est_u) {
  return sdcm::make_error_record("s", 0, 0.0, true_u, est_u);
}

}  // namespace

TEST_CASE("percent absolute error arithmetic") {
  CHECK(sdcm::pae(100.0, 109.83) == Approx(9.83).epsilon(1e-12));
  CHECK(sdcm::pae(150.0, 150.0) == 0.0);
  CHECK(sdcm::pae(200.0, 150.0) == Approx(25.0));
  CHECK_THROWS_AS(sdcm::pae(0.0, 10.0), sdcm::invalid_input);
  CHECK_THROWS_AS(sdcm::pae(-5.0, 10.0), sdcm::invalid_input);
}

TEST_CASE("pae is scale invariant") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> val(10.0, 500.0), scale(0.1, 10.0);
  for (int i = 0; i < 100; ++i) {
    const double t = val(rng), e = val(rng), s = scale(rng);
    CHECK(sdcm::pae(t, e) == Approx(sdcm::pae(t * s, e * s)).epsilon(1e-11));
  }
}

TEST_CASE("accuracy rule branches at 100 mg/dL") {
  CHECK(sdcm::iso15197_record_pass(rec(200.0, 228.0)));        // 14 %
  CHECK_FALSE(sdcm::iso15197_record_pass(rec(200.0, 232.0)));  // 16 %
  // low range: absolute band applies even when the percent error is large
  const auto low = rec(80.0, 94.0);
  CHECK(low.pae == Approx(17.5));
  CHECK(sdcm::iso15197_record_pass(low));
  CHECK_FALSE(sdcm::iso15197_record_pass(rec(80.0, 96.0)));  // 16 mg/dL
}

TEST_CASE("overall pass is inclusive at exactly 95%") {
  std::vector<ErrorRecord> records;
  for (int i = 0; i < 95; ++i) records.push_back(rec(200.0, 200.0));
  for (int i = 0; i < 5; ++i) records.push_back(rec(200.0, 300.0));
  const auto res = sdcm::iso15197_check(records);
  CHECK(res.pass_fraction == Approx(0.95));
  CHECK(res.pass);
  records.push_back(rec(200.0, 300.0));
  CHECK_FALSE(sdcm::iso15197_check(records).pass);
  CHECK_THROWS_AS(sdcm::iso15197_check({}), sdcm::invalid_input);
}

TEST_CASE("improving an estimate toward its truth never flips pass to fail") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> val(30.0, 400.0);
  for (int i = 0; i < 300; ++i) {
    const double truth = val(rng), est = val(rng);
    const double closer = truth + 0.5 * (est - truth);
    CHECK(sdcm::iso15197_record_pass(rec(truth, est)) <=
          sdcm::iso15197_record_pass(rec(truth, closer)));
  }
}

TEST_CASE("boxplot of {1..5} per the hand computation") {
  const auto s = sdcm::boxplot_stats({5.0, 3.0, 1.0, 4.0, 2.0});
  CHECK(s.median == 3.0);
  CHECK(s.q1 == 2.0);
  CHECK(s.q3 == 4.0);
  CHECK(s.iqr == 2.0);
  CHECK(s.whisker_lo == -1.0);
  CHECK(s.whisker_hi == 7.0);
  CHECK(s.outliers.empty());
}

TEST_CASE("constant values produce zero IQR and no outliers") {
  const auto s = sdcm::boxplot_stats({2.5, 2.5, 2.5, 2.5});
  CHECK(s.iqr == 0.0);
  CHECK(s.outliers.empty());
  CHECK_THROWS_AS(sdcm::boxplot_stats({}), sdcm::invalid_input);
}

TEST_CASE("a value at median + 3 IQR is flagged") {
  std::vector<double> vals{1, 2, 3, 4, 5};
  const auto base = sdcm::boxplot_stats(vals);
  vals.push_back(base.median + 3.0 * base.iqr);  // 9
  const auto s = sdcm::boxplot_stats(vals);
  REQUIRE(s.outliers.size() == 1);
  CHECK(s.outliers[0] == 9.0);
}

TEST_CASE("outlier detection is permutation invariant") {
  std::mt19937_64 rng(23);
  std::vector<double> vals;
  std::uniform_real_distribution<double> v(0.0, 10.0);
  for (int i = 0; i < 40; ++i) vals.push_back(v(rng));
  vals.push_back(100.0);
  auto a = sdcm::boxplot_stats(vals);
  std::shuffle(vals.begin(), vals.end(), rng);
  auto b = sdcm::boxplot_stats(vals);
  CHECK(a.outliers == b.outliers);
  CHECK(a.median == b.median);
}

// --- cross validation ----------------------------------------------------------

namespace {

/// small synthetic population through the stock sensor
std::vector<sdcm::TimeSeries> tiny_population(int n, double hours, std::uint64_t seed) {
  auto specs = sdcm::sample_population(n, seed, hours * 3600.0, 180.0);
  std::vector<sdcm::TimeSeries> out;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto prof = sdcm::generate_profile(specs[i]);
    out.push_back(sdcm::simulate_series(sdcm::SensorModel{}, prof.u, 180.0,
                                        "p" + std::to_string(i)));
  }
  return out;
}

sdcm::CvConfig tiny_cv_config() {
  sdcm::CvConfig cfg;
  cfg.n_folds = 2;
  cfg.window = sdcm::WindowSpec{4, 1};
  cfg.downsample_factor = 3;
  cfg.search.n_trials = 2;
  cfg.search.max_iterations = 40;
  cfg.search.n_threads = 1;
  cfg.max_train_samples = 250;
  cfg.rng_seed = 9;
  cfg.n_threads = 2;
  return cfg;
}

}  // namespace

TEST_CASE("cross validation is reproducible and splits by series") {
  auto series = tiny_population(6, 8.0, 5);
  auto cfg = tiny_cv_config();
  cfg.snr_db_list = {55.0};
  const auto a = sdcm::cross_validate(series, cfg);
  const auto b = sdcm::cross_validate(series, cfg);
  REQUIRE(a.folds.size() == 2);
  REQUIRE(a.aggregates.size() == 1);
  CHECK(a.aggregates[0].mean_pae == b.aggregates[0].mean_pae);
  CHECK(a.aggregates[0].n_records == b.aggregates[0].n_records);
  for (std::size_t f = 0; f < a.folds.size(); ++f) {
    CHECK(a.folds[f].theta.delta == b.folds[f].theta.delta);
    // test records come only from held-out series
    for (const auto& r : a.folds[f].records) {
      const auto& train = a.folds[f].train_ids;
      CHECK(!std::binary_search(train.begin(), train.end(), r.series_id));
    }
  }
}

TEST_CASE("SNR sweep yields one aggregate per level") {
  auto series = tiny_population(5, 6.0, 21);
  auto cfg = tiny_cv_config();
  cfg.n_folds = 1;
  cfg.snr_db_list = {65.0, 55.0, 45.0, 35.0};
  const auto res = sdcm::cross_validate(series, cfg);
  REQUIRE(res.aggregates.size() == 4);
  REQUIRE(res.folds.size() == 4);
  for (const auto& agg : res.aggregates) CHECK(agg.n_records > 0);
}

TEST_CASE("sample-level 85:15 mode approximates the requested sizes") {
  auto series = tiny_population(2, 6.0, 33);
  auto cfg = tiny_cv_config();
  cfg.mode = sdcm::SplitMode::by_sample;
  cfg.test_fraction = 0.15;
  cfg.n_folds = 1;
  cfg.max_train_samples = 0;
  const auto res = sdcm::cross_validate(series, cfg);
  // 2 series of 6h at 9-min step: 41 samples each, minus window edges
  const int total = 2 * (41 - 5);
  const int expected_test = static_cast<int>(std::llround(0.15 * total));
  CHECK(static_cast<int>(res.folds[0].records.size()) == expected_test);
}

TEST_CASE("cross validation validates its inputs") {
  auto series = tiny_population(4, 4.0, 3);
  auto cfg = tiny_cv_config();
  cfg.n_folds = 0;
  CHECK_THROWS_AS(sdcm::cross_validate(series, cfg), sdcm::invalid_input);
  cfg = tiny_cv_config();
  cfg.snr_db_list.clear();
  CHECK_THROWS_AS(sdcm::cross_validate(series, cfg), sdcm::invalid_input);
  CHECK_THROWS_AS(sdcm::cross_validate({}, tiny_cv_config()), sdcm::invalid_input);
  series[0].u_ref.reset();
  CHECK_THROWS_AS(sdcm::cross_validate(series, tiny_cv_config()), sdcm::invalid_input);
}
