// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include "mavloc/features.hpp"
#include "mavloc/rng.hpp"

using namespace mavloc;

TEST_CASE("zero trace: log-magnitudes zero, zero-phase convention") {
  const Eigen::MatrixXd samples = Eigen::MatrixXd::Zero(2, 128);
  const StftFeatures ft = stft_features(samples, FeatureConfig{});
  for (int row = 0; row < ft.feat.rows(); ++row)
    for (int b = 0; b < ft.bins; ++b) {
      CHECK(ft.feat(row, 3 * b) == 0.0);
      CHECK(ft.feat(row, 3 * b + 1) == 1.0);
      CHECK(ft.feat(row, 3 * b + 2) == 0.0);
    }
}

TEST_CASE("frame count arithmetic") {
  FeatureConfig cfg;
  CHECK(stft_frames(1025, cfg) == 31);
  CHECK(stft_frames(64, cfg) == 1);
  CHECK_THROWS_AS(stft_frames(63, cfg), TraceTooShort);

  FeatureConfig strided = cfg;
  strided.frame_stride = 2;
  CHECK(stft_frames(1025, strided) == 15);
  const Eigen::MatrixXd samples = Eigen::MatrixXd::Random(2, 1025);
  CHECK(stft_features(samples, strided).feat.rows() == 2 * 15);
}

TEST_CASE("bin-centered cosine concentrates its energy") {
  // One full frame of a cosine exactly on bin 5; compare against a direct
  // DFT of the tapered frame computed from scratch.
  FeatureConfig cfg;
  const int w = cfg.window;
  const int b0 = 5;
  Eigen::MatrixXd samples(1, w);
  for (int n = 0; n < w; ++n) samples(0, n) = std::cos(kTwoPi * b0 * n / w);

  const StftFeatures ft = stft_features(samples, cfg);
  REQUIRE(ft.frames == 1);

  std::vector<double> power(ft.bins);
  double total = 0.0;
  for (int b = 0; b < ft.bins; ++b) {
    double re = 0.0, im = 0.0;
    for (int n = 0; n < w; ++n) {
      const double taper = 0.5 - 0.5 * std::cos(kTwoPi * n / (w - 1));
      re += taper * samples(0, n) * std::cos(kTwoPi * b * n / w);
      im -= taper * samples(0, n) * std::sin(kTwoPi * b * n / w);
    }
    power[b] = re * re + im * im;
    total += power[b];
    // Features agree with the direct computation.
    CHECK(ft.feat(0, 3 * b) == Catch::Approx(std::log1p(std::sqrt(power[b]))).margin(1e-12));
  }

  const double mainlobe = power[b0 - 1] + power[b0] + power[b0 + 1];
  CHECK(mainlobe / total > 0.99);
  for (int b = 0; b < ft.bins; ++b)
    if (std::abs(b - b0) > 1) CHECK(power[b] / total < 0.01);
}

TEST_CASE("demodulated phases are stable across frames for a steady tone") {
  FeatureConfig cfg;
  const int b0 = 3;
  Eigen::MatrixXd samples(1, 64 + 3 * 32);
  for (int n = 0; n < samples.cols(); ++n)
    samples(0, n) = std::cos(kTwoPi * b0 * n / cfg.window + 0.7);

  const StftFeatures ft = stft_features(samples, cfg);
  REQUIRE(ft.frames == 4);
  for (int f = 1; f < ft.frames; ++f) {
    CHECK(ft.feat(f, 3 * b0 + 1) == Catch::Approx(ft.feat(0, 3 * b0 + 1)).margin(1e-9));
    CHECK(ft.feat(f, 3 * b0 + 2) == Catch::Approx(ft.feat(0, 3 * b0 + 2)).margin(1e-9));
  }
  // Pooling over frames therefore keeps the tone's phase.
  const Eigen::MatrixXd pooled = ft.pooled_per_channel();
  const double mag = std::hypot(pooled(0, 3 * b0 + 1), pooled(0, 3 * b0 + 2));
  CHECK(mag == Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("pooled feature backward matches finite differences") {
  auto rng = derive_stream(61, 0);
  Eigen::MatrixXd samples(2, 96);
  for (int c = 0; c < 2; ++c)
    for (int n = 0; n < 96; ++n) samples(c, n) = gaussian(rng);

  FeatureConfig cfg;
  const StftFeatures ft = stft_features(samples, cfg);
  Eigen::MatrixXd dpooled(2, ft.feat.cols());
  for (int c = 0; c < 2; ++c)
    for (int i = 0; i < dpooled.cols(); ++i) dpooled(c, i) = uniform01(rng) - 0.5;

  const Eigen::MatrixXd back = stft_pooled_backward(ft, cfg, 96, dpooled);
  REQUIRE(back.rows() == 2);
  REQUIRE(back.cols() == 96);

  auto objective = [&](const Eigen::MatrixXd& s) {
    return dpooled.cwiseProduct(stft_features(s, cfg).pooled_per_channel()).sum();
  };
  const double step = 1e-6;
  for (int c = 0; c < 2; ++c)
    for (int n = 0; n < 96; n += 7) {
      Eigen::MatrixXd plus = samples, minus = samples;
      plus(c, n) += step;
      minus(c, n) -= step;
      const double fd = (objective(plus) - objective(minus)) / (2 * step);
      CHECK(back(c, n) == Catch::Approx(fd).margin(1e-6 * std::max(1.0, std::abs(fd))));
    }
}
