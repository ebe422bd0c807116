// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include "mavloc/core.hpp"
#include "mavloc/rng.hpp"

using namespace mavloc;

TEST_CASE("pose_apply basics") {
  CHECK(pose_apply(Pose2{}, {1.0, 0.0}).x == Catch::Approx(1.0));
  CHECK(pose_apply(Pose2{}, {1.0, 0.0}).y == Catch::Approx(0.0));

  const Vec2 quarter = pose_apply(Pose2(kPi / 2, {0, 0}), {1.0, 0.0});
  CHECK(quarter.x == Catch::Approx(0.0).margin(1e-15));
  CHECK(quarter.y == Catch::Approx(1.0));

  const Vec2 moved = pose_apply(Pose2(kPi / 2, {3, 4}), {1.0, 0.0});
  CHECK(moved.x == Catch::Approx(3.0).margin(1e-15));
  CHECK(moved.y == Catch::Approx(5.0));
}

TEST_CASE("pose_apply preserves distances") {
  auto rng = derive_stream(7, 0);
  for (int i = 0; i < 50; ++i) {
    const Pose2 pose(uniform01(rng) * 10 - 5, {uniform01(rng) * 4, uniform01(rng) * 4});
    const Vec2 a{uniform01(rng) * 10 - 5, uniform01(rng) * 10 - 5};
    const Vec2 b{uniform01(rng) * 10 - 5, uniform01(rng) * 10 - 5};
    const double before = distance(a, b);
    const double after = distance(pose_apply(pose, a), pose_apply(pose, b));
    CHECK(after == Catch::Approx(before).epsilon(1e-12));
  }
}

TEST_CASE("wrap_angle convention") {
  CHECK(wrap_angle(0.0) == 0.0);
  CHECK(wrap_angle(3 * kPi) == Catch::Approx(kPi));
  CHECK(wrap_angle(-kPi) == Catch::Approx(kPi));  // half-open interval (-pi, pi]
  auto rng = derive_stream(8, 0);
  for (int i = 0; i < 100; ++i) {
    const double a = (uniform01(rng) - 0.5) * 100.0;
    const double w = wrap_angle(a);
    CHECK(w > -kPi);
    CHECK(w <= kPi);
    CHECK(wrap_angle(w) == Catch::Approx(w).margin(1e-15));
    CHECK(std::remainder(a - w, kTwoPi) == Catch::Approx(0.0).margin(1e-9));
  }
}

TEST_CASE("sample clock invariants and encoder span") {
  CHECK_THROWS_AS(SampleClock(0.0, 1.0, 4), ConfigError);
  CHECK_THROWS_AS(SampleClock(1.0, 1.0, 0), ConfigError);

  // Encoder samples cover the audio span [0, (N-1)/f_s].
  const SampleClock clock(1000.0, 500.0, 101);
  CHECK(clock.encoder_samples() == 51);
}

TEST_CASE("derived rng streams are stable and independent") {
  auto a = derive_stream(42, 3);
  auto b = derive_stream(42, 3);
  auto c = derive_stream(42, 4);
  CHECK(a() == b());
  CHECK(a() != c());
}
