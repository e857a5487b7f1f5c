#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "sdcm/windowing.hpp"

using Catch::Approx;
using sdcm::TimeSeries;
using sdcm::WindowSpec;

namespace {

TimeSeries make_series(std::size_t n, double interval_s, bool with_ref = true,
                       std::string id = "s0") {
  TimeSeries s;
  s.series_id = std::move(id);
  s.sample_interval = interval_s;
  for (std::size_t k = 0; k < n; ++k) {
    s.t.push_back(static_cast<double>(k) * interval_s);
    s.y.push_back(0.1 * static_cast<double>(k));
  }
  if (with_ref) {
    s.u_ref.emplace();
    for (std::size_t k = 0; k < n; ++k) s.u_ref->push_back(100.0 + static_cast<double>(k));
  }
  return s;
}

}  // namespace

TEST_CASE("downsampling a 3-minute series by 3 gives a 9-minute series") {
  auto s = make_series(381, 180.0);
  auto d = sdcm::downsample(s, 3);
  CHECK(d.sample_interval == Approx(540.0));
  CHECK(d.size() == 127);
  CHECK(d.t[1] - d.t[0] == Approx(540.0));
  CHECK_NOTHROW(validate(d));
}

TEST_CASE("downsample factor 1 is the identity") {
  auto s = make_series(10, 60.0);
  auto d = sdcm::downsample(s, 1);
  CHECK(d.t == s.t);
  CHECK(d.y == s.y);
  CHECK(*d.u_ref == *s.u_ref);
}

TEST_CASE("downsample keeps indices 0, f, 2f, ...") {
  auto s = make_series(10, 1.0);
  auto d = sdcm::downsample(s, 3);
  REQUIRE(d.size() == 4);  // indices 0, 3, 6, 9
  CHECK(d.y[0] == s.y[0]);
  CHECK(d.y[1] == s.y[3]);
  CHECK(d.y[2] == s.y[6]);
  CHECK(d.y[3] == s.y[9]);
  CHECK_THROWS_AS(sdcm::downsample(s, 0), sdcm::invalid_input);
}

TEST_CASE("constant reference at 20 dB SNR gets noise of std 10") {
  TimeSeries s = make_series(10000, 1.0);
  std::fill(s.u_ref->begin(), s.u_ref->end(), 100.0);
  auto noisy = sdcm::add_reference_noise(s, 20.0, 99);
  double mean = 0.0, var = 0.0;
  for (double u : *noisy.u_ref) mean += u - 100.0;
  mean /= static_cast<double>(noisy.u_ref->size());
  for (double u : *noisy.u_ref) var += (u - 100.0 - mean) * (u - 100.0 - mean);
  var /= static_cast<double>(noisy.u_ref->size());
  CHECK(std::sqrt(var) == Approx(10.0).epsilon(0.05));
}

TEST_CASE("infinite SNR leaves the series untouched") {
  auto s = make_series(50, 1.0);
  auto out = sdcm::add_reference_noise(s, std::numeric_limits<double>::infinity(), 1);
  CHECK(*out.u_ref == *s.u_ref);
}

TEST_CASE("55 dB injection lands within half a dB of the target") {
  TimeSeries s = make_series(10000, 1.0);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> level(80.0, 300.0);
  for (auto& u : *s.u_ref) u = level(rng);
  auto noisy = sdcm::add_reference_noise(s, 55.0, 77);
  double sig = 0.0, noise = 0.0;
  for (std::size_t k = 0; k < s.size(); ++k) {
    sig += (*s.u_ref)[k] * (*s.u_ref)[k];
    const double e = (*noisy.u_ref)[k] - (*s.u_ref)[k];
    noise += e * e;
  }
  const double snr_db = 10.0 * std::log10(sig / noise);
  CHECK(snr_db == Approx(55.0).margin(0.5));
}

TEST_CASE("noise injection changes only the reference channel and is seeded") {
  auto s = make_series(100, 1.0);
  auto a = sdcm::add_reference_noise(s, 30.0, 123);
  auto b = sdcm::add_reference_noise(s, 30.0, 123);
  auto c = sdcm::add_reference_noise(s, 30.0, 124);
  CHECK(a.y == s.y);
  CHECK(a.t == s.t);
  CHECK(*a.u_ref == *b.u_ref);
  CHECK(*a.u_ref != *c.u_ref);
  TimeSeries no_ref = make_series(5, 1.0, false);
  CHECK_THROWS_AS(sdcm::add_reference_noise(no_ref, 30.0, 1), sdcm::invalid_input);
}

TEST_CASE("window extraction follows the stacking order") {
  auto s = make_series(6, 2.0);
  auto samples = sdcm::extract_samples(s, WindowSpec{2, 1});
  REQUIRE(samples.size() == 3);  // 6 - 2 - 1
  // center k=2: [y0, y1, y2, y3, t2]
  const auto& z = samples[0].z;
  REQUIRE(z.size() == 5);
  CHECK(z[0] == s.y[0]);
  CHECK(z[1] == s.y[1]);
  CHECK(z[2] == s.y[2]);
  CHECK(z[3] == s.y[3]);
  CHECK(z[4] == s.t[2]);
  CHECK(samples[0].u == (*s.u_ref)[2]);
}

TEST_CASE("degenerate p=0, ell=0 window keeps every sample") {
  auto s = make_series(7, 1.0);
  auto samples = sdcm::extract_samples(s, WindowSpec{0, 0});
  REQUIRE(samples.size() == 7);
  for (std::size_t k = 0; k < samples.size(); ++k) {
    REQUIRE(samples[k].z.size() == 2);
    CHECK(samples[k].z[0] == s.y[k]);
    CHECK(samples[k].z[1] == s.t[k]);
  }
}

TEST_CASE("sample count is len - p - ell") {
  auto s = make_series(127, 540.0);
  CHECK(sdcm::extract_samples(s, WindowSpec{6, 1}).size() == 120);
  auto tiny = make_series(7, 1.0);
  CHECK_THROWS_AS(sdcm::extract_samples(tiny, WindowSpec{6, 1}), sdcm::invalid_input);
}

TEST_CASE("windowing matches direct index arithmetic on random shapes") {
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<int> len(5, 60), pd(0, 4), ld(0, 3);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = len(rng);
    WindowSpec w{pd(rng), ld(rng)};
    if (n < w.window_len()) continue;
    auto s = make_series(static_cast<std::size_t>(n), 3.0);
    auto samples = sdcm::extract_samples(s, w);
    REQUIRE(static_cast<int>(samples.size()) == n - w.p - w.ell);
    std::uniform_int_distribution<std::size_t> pick(0, samples.size() - 1);
    const std::size_t j = pick(rng);
    const std::size_t k = j + static_cast<std::size_t>(w.p);
    REQUIRE(samples[j].z.size() == w.feature_dim());
    for (int c = 0; c < w.window_len(); ++c)
      CHECK(samples[j].z[c] == s.y[k - static_cast<std::size_t>(w.p) + static_cast<std::size_t>(c)]);
    CHECK(samples[j].z[w.feature_dim() - 1] == s.t[k]);
    CHECK(samples[j].u == (*s.u_ref)[k]);
  }
}

TEST_CASE("series split is a deterministic partition") {
  std::vector<std::string> ids;
  for (int i = 0; i < 20; ++i) ids.push_back("patient_" + std::to_string(i));
  auto split = sdcm::split_by_series(ids, 0.2, 2026);
  CHECK(split.test_ids.size() == 4);
  CHECK(split.train_ids.size() == 16);
  auto again = sdcm::split_by_series(ids, 0.2, 2026);
  CHECK(split.test_ids == again.test_ids);
  CHECK(split.train_ids == again.train_ids);

  std::set<std::string> all(split.train_ids.begin(), split.train_ids.end());
  for (const auto& id : split.test_ids) {
    CHECK(all.count(id) == 0);
    all.insert(id);
  }
  CHECK(all.size() == ids.size());
}

TEST_CASE("series split rejects bad fractions and tiny inputs") {
  std::vector<std::string> ids{"a", "b", "c"};
  CHECK_THROWS_AS(sdcm::split_by_series(ids, 0.0, 1), sdcm::invalid_input);
  CHECK_THROWS_AS(sdcm::split_by_series(ids, 1.0, 1), sdcm::invalid_input);
  CHECK_THROWS_AS(sdcm::split_by_series({"only"}, 0.5, 1), sdcm::invalid_input);
  // extreme fractions still leave one series on each side
  auto split = sdcm::split_by_series(ids, 0.01, 1);
  CHECK(split.test_ids.size() == 1);
}
