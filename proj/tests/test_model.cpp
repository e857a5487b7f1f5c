#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "oracles.hpp"
#include "sdcm/model.hpp"

using Catch::Approx;
using sdcm::Hyperparameters;
using sdcm::NormalizationConfig;
using sdcm::WindowSpec;

namespace {

NormalizationConfig raw_units() {
  NormalizationConfig n;
  n.normalize_features = false;
  n.target_scale = 1.0;
  return n;
}

WindowSpec window_for_dim(int dim) {
  // feature_dim = p + ell + 2
  return WindowSpec{dim - 2, 0};
}

}  // namespace

TEST_CASE("build_model rejects tiny datasets and mismatched dimensions") {
  std::vector<sdcm::CalibrationSample> one(1);
  one[0].z = Eigen::VectorXd::Zero(4);
  one[0].u = 100.0;
  CHECK_THROWS_AS(sdcm::build_model(one, {}, {}, window_for_dim(4)), sdcm::invalid_input);

  std::vector<sdcm::CalibrationSample> two(2);
  two[0].z = Eigen::VectorXd::Zero(4);
  two[1].z = Eigen::VectorXd::Zero(5);
  CHECK_THROWS_AS(sdcm::build_model(two, {}, {}, window_for_dim(4)), sdcm::invalid_input);
}

TEST_CASE("two identical samples give the textbook 2x2 covariance") {
  std::vector<sdcm::CalibrationSample> ds(2);
  ds[0].z = Eigen::VectorXd::Zero(3);
  ds[1].z = Eigen::VectorXd::Zero(3);
  ds[0].u = 0.5;
  ds[1].u = 0.7;
  Hyperparameters th{1.0, 1.0, 0.1};
  // Sigma11 = [[1.01, 1.0], [1.0, 1.01]]: reconstruct it from the factor.
  auto model = sdcm::assemble_model(ds, th, raw_units(), window_for_dim(3));
  Eigen::MatrixXd L = model.sigma11_llt.matrixL();
  Eigen::MatrixXd S = L * L.transpose();
  CHECK(S(0, 0) == Approx(1.01).epsilon(1e-12));
  CHECK(S(0, 1) == Approx(1.0).epsilon(1e-12));
  CHECK(S(1, 0) == Approx(1.0).epsilon(1e-12));
  CHECK(S(1, 1) == Approx(1.01).epsilon(1e-12));
  CHECK(model.jitter == 0.0);
}

TEST_CASE("prior mean is exactly the dataset mean of normalized references") {
  std::mt19937_64 rng(5);
  auto ds = oracle::random_dataset(17, 4, rng);
  auto model = sdcm::build_model(ds, Hyperparameters{1.0, 1.0, 0.05},
                                 NormalizationConfig{}, window_for_dim(4));
  double acc = 0.0;
  for (const auto& s : ds) acc += s.u / model.norm.target_scale;
  CHECK(model.mu == acc / static_cast<double>(ds.size()));
}

TEST_CASE("single-sample posterior matches the 1x1 hand computation") {
  std::vector<sdcm::CalibrationSample> ds(1);
  ds[0].z = Eigen::VectorXd::Zero(3);
  ds[0].z << 0.2, 0.4, 10.0;
  ds[0].u = 0.63;
  const double sigma = 1.3, sigma_u = 0.2;
  auto model = sdcm::assemble_model(ds, Hyperparameters{0.9, sigma, sigma_u}, raw_units(),
                                    window_for_dim(3));
  const auto est = sdcm::predict(model, ds[0].z);
  // mu = u1, residual zero, so the mean reproduces the stored reference
  CHECK(est.mean == Approx(0.63).epsilon(1e-14));
  const double s2 = sigma * sigma, n2 = sigma_u * sigma_u;
  CHECK(est.variance == Approx(s2 * n2 / (s2 + n2)).epsilon(1e-12));
}

TEST_CASE("far queries revert to the prior") {
  std::mt19937_64 rng(9);
  auto ds = oracle::random_dataset(12, 3, rng, 1.0);
  auto model = sdcm::assemble_model(ds, Hyperparameters{0.8, 1.1, 0.1}, raw_units(),
                                    window_for_dim(3));
  Eigen::VectorXd far(3);
  far << 1e4, -1e4, 1e4;
  const auto est = sdcm::predict(model, far);
  CHECK(est.mean == Approx(model.mu).margin(1e-12));
  CHECK(est.variance == Approx(1.1 * 1.1).epsilon(1e-12));
}

TEST_CASE("posterior matches the dense-inverse oracle on random datasets") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 5; ++trial) {
    auto ds = oracle::random_dataset(20, 5, rng);
    Hyperparameters th{1.2, 0.9, 0.15};
    NormalizationConfig norm;  // defaults: z-scored features, scale 400
    auto model = sdcm::build_model(ds, th, norm, window_for_dim(5));

    // oracle works on the same normalized quantities
    Eigen::MatrixXd Z(20, 5);
    Eigen::VectorXd u(20);
    for (int i = 0; i < 20; ++i) {
      Z.row(i) = model.stats.apply(ds[static_cast<std::size_t>(i)].z).transpose();
      u[i] = ds[static_cast<std::size_t>(i)].u / norm.target_scale;
    }
    std::uniform_real_distribution<double> feat(-1.5, 1.5);
    for (int q = 0; q < 5; ++q) {
      Eigen::VectorXd zq(5);
      for (int d = 0; d < 5; ++d) zq[d] = feat(rng);
      const auto est = sdcm::predict(model, zq);
      const auto ref = oracle::posterior(Z, u, th, model.stats.apply(zq));
      CHECK(est.mean / norm.target_scale == Approx(ref.mean_n).epsilon(1e-8));
      CHECK(est.variance / (norm.target_scale * norm.target_scale) ==
            Approx(ref.var_n).epsilon(1e-8).margin(1e-12));
    }
  }
}

TEST_CASE("confidence is the inverse normalized posterior std") {
  // normalized variance 4 -> gamma 0.5, via a model scaled so the physical
  // variance is 4 * scale^2
  std::vector<sdcm::CalibrationSample> ds(2);
  ds[0].z = Eigen::VectorXd::Zero(3);
  ds[1].z = Eigen::VectorXd::Ones(3);
  ds[0].u = 100.0;
  ds[1].u = 200.0;
  auto model = sdcm::build_model(ds, Hyperparameters{0.5, 2.0, 0.3}, NormalizationConfig{},
                                 window_for_dim(3));
  Eigen::VectorXd far = Eigen::VectorXd::Constant(3, 1e6);
  const auto est = sdcm::predict(model, far);  // variance reverts to sigma^2 = 4
  CHECK(est.confidence == Approx(0.5).epsilon(1e-9));
}

TEST_CASE("near-interpolation at the noise floor") {
  std::mt19937_64 rng(77);
  auto ds = oracle::random_dataset(30, 4, rng);
  auto model = sdcm::build_model(ds, Hyperparameters{1.5, 1.0, 1e-5}, NormalizationConfig{},
                                 window_for_dim(4));
  for (const auto& s : ds) {
    const auto est = sdcm::predict(model, s.z);
    CHECK(std::abs(est.mean - s.u) <= 1e-3 * model.norm.target_scale);
  }
}

TEST_CASE("variance stays within prior bounds over random queries") {
  std::mt19937_64 rng(31337);
  auto ds = oracle::random_dataset(25, 4, rng);
  Hyperparameters th{0.7, 1.2, 0.05};
  auto model = sdcm::build_model(ds, th, NormalizationConfig{}, window_for_dim(4));
  std::uniform_real_distribution<double> feat(-3.0, 3.0);
  for (int q = 0; q < 2000; ++q) {
    Eigen::VectorXd z(4);
    for (int d = 0; d < 4; ++d) z[d] = feat(rng);
    const auto est = sdcm::predict(model, z);
    const double var_n = est.variance / (model.norm.target_scale * model.norm.target_scale);
    CHECK(var_n >= 0.0);
    CHECK(var_n <= th.sigma * th.sigma + 1e-8);
  }
}

TEST_CASE("predict validates query dimension") {
  std::mt19937_64 rng(1);
  auto ds = oracle::random_dataset(5, 3, rng);
  auto model = sdcm::build_model(ds, Hyperparameters{1, 1, 0.1}, NormalizationConfig{},
                                 window_for_dim(3));
  CHECK_THROWS_AS(sdcm::predict(model, Eigen::VectorXd::Zero(4)), sdcm::invalid_input);
}

TEST_CASE("feature normalization stores training statistics") {
  std::mt19937_64 rng(8);
  auto ds = oracle::random_dataset(40, 3, rng);
  // make one dimension wildly out of scale, like elapsed seconds
  for (auto& s : ds) s.z[2] = s.z[2] * 3e4 + 4e4;
  auto model = sdcm::build_model(ds, Hyperparameters{1.0, 1.0, 0.05}, NormalizationConfig{},
                                 window_for_dim(3));
  CHECK(model.features.col(2).mean() == Approx(0.0).margin(1e-9));
  CHECK(model.features.col(2).squaredNorm() / model.size() == Approx(1.0).epsilon(1e-9));
  // constant dims normalize to zero without dividing by zero
  for (auto& s : ds) s.z[1] = 5.0;
  auto model2 = sdcm::build_model(ds, Hyperparameters{1.0, 1.0, 0.05}, NormalizationConfig{},
                                  window_for_dim(3));
  CHECK(model2.features.col(1).cwiseAbs().maxCoeff() == 0.0);
}
