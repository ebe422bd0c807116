// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include "mavloc/aggregate.hpp"
#include "mavloc/rng.hpp"

using namespace mavloc;

namespace {

double median_objective(const std::vector<Vec2>& pts, const Vec2& y) {
  double s = 0.0;
  for (const Vec2& p : pts) s += distance(y, p);
  return s;
}

// Brute-force oracle: exhaustive search on a 1e-3 grid over the bounding box.
Vec2 grid_search_median(const std::vector<Vec2>& pts, double resolution = 1e-3) {
  double x0 = pts[0].x, x1 = pts[0].x, y0 = pts[0].y, y1 = pts[0].y;
  for (const Vec2& p : pts) {
    x0 = std::min(x0, p.x);
    x1 = std::max(x1, p.x);
    y0 = std::min(y0, p.y);
    y1 = std::max(y1, p.y);
  }
  Vec2 best{x0, y0};
  double best_obj = median_objective(pts, best);
  const int nx = static_cast<int>((x1 - x0) / resolution) + 1;
  const int ny = static_cast<int>((y1 - y0) / resolution) + 1;
  for (int i = 0; i <= nx; ++i)
    for (int j = 0; j <= ny; ++j) {
      const Vec2 cand{x0 + i * resolution, y0 + j * resolution};
      const double obj = median_objective(pts, cand);
      if (obj < best_obj) {
        best_obj = obj;
        best = cand;
      }
    }
  return best;
}

}  // namespace

TEST_CASE("identical points converge immediately") {
  const std::vector<Vec2> pts(5, Vec2{1.25, -3.5});
  const GeometricMedianResult res = geometric_median(pts);
  CHECK(res.converged);
  CHECK(res.iterations == 1);
  CHECK(res.point.x == Catch::Approx(1.25).margin(1e-9));
  CHECK(res.point.y == Catch::Approx(-3.5).margin(1e-9));
}

TEST_CASE("unit square corners") {
  const std::vector<Vec2> pts{{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  const GeometricMedianResult res = geometric_median(pts, 1e-6, 200);
  CHECK(res.converged);
  CHECK(res.iterations <= 50);
  CHECK(distance(res.point, {0.5, 0.5}) <= 1e-6);
}

TEST_CASE("triangle matches the grid-search oracle") {
  const std::vector<Vec2> pts{{0, 0}, {2, 0}, {1, 5}};
  const Vec2 fast = geometric_median(pts, 1e-8, 500).point;
  const Vec2 brute = grid_search_median(pts);
  CHECK(distance(fast, brute) <= 2e-3);
}

TEST_CASE("random point sets match the grid-search oracle") {
  for (std::uint64_t seed : {101u, 102u, 103u}) {
    auto rng = derive_stream(seed, 0);
    std::vector<Vec2> pts;
    for (int i = 0; i < 20; ++i) pts.push_back({uniform01(rng), uniform01(rng)});
    const Vec2 fast = geometric_median(pts, 1e-8, 500).point;
    const Vec2 brute = grid_search_median(pts);
    CHECK(distance(fast, brute) <= 2e-3);
  }
}

TEST_CASE("translation equivariance") {
  auto rng = derive_stream(104, 0);
  std::vector<Vec2> pts, shifted;
  const Vec2 v{12.5, -7.25};
  for (int i = 0; i < 15; ++i) {
    pts.push_back({uniform01(rng) * 3, uniform01(rng) * 3});
    shifted.push_back(pts.back() + v);
  }
  const Vec2 a = geometric_median(pts, 1e-12, 300).point;
  const Vec2 b = geometric_median(shifted, 1e-12, 300).point;
  CHECK(distance(a + v, b) <= 1e-9);
}

TEST_CASE("odd collinear points return the middle one") {
  const std::vector<Vec2> pts{{0, 0}, {1, 1}, {2, 2}, {3, 3}, {4, 4}};
  const Vec2 med = geometric_median(pts, 1e-9, 500).point;
  CHECK(distance(med, {2, 2}) <= 1e-6);
}

TEST_CASE("median objective beats every input point") {
  auto rng = derive_stream(105, 0);
  std::vector<Vec2> pts;
  for (int i = 0; i < 9; ++i) pts.push_back({uniform01(rng) * 5, uniform01(rng) * 5});
  const GeometricMedianResult res = geometric_median(pts);
  const double obj = median_objective(pts, res.point);
  for (const Vec2& p : pts) CHECK(obj <= median_objective(pts, p) + 1e-6);
}

TEST_CASE("aggregate of one measurement equals predict") {
  const SampleClock clock(400.0, 400.0, 96);
  const LocalizerModel model = LocalizerModel::make(clock, 2, kNumRotors, FeatureConfig{}, 8, 3);

  Measurement m;
  m.pose = Pose2(0.9, {2.0, 2.0});
  auto rng = derive_stream(106, 0);
  m.mics.clock = clock;
  m.mics.samples.resize(2, clock.n_samples);
  for (int c = 0; c < 2; ++c)
    for (int n = 0; n < clock.n_samples; ++n) m.mics.samples(c, n) = gaussian(rng);
  m.phases.clock = clock;
  m.phases.samples = Eigen::MatrixXd::Zero(kNumRotors, clock.encoder_samples());

  const Vec2 direct = predict(model, m.mics, m.phases, m.pose.azimuth);
  const Vec2 agg = aggregate_estimates(model, {m});
  CHECK(agg.x == Catch::Approx(direct.x).margin(1e-12));
  CHECK(agg.y == Catch::Approx(direct.y).margin(1e-12));

  CHECK_THROWS_AS(aggregate_estimates(model, {}), ConfigError);
}
