// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <catch2/catch_amalgamated.hpp>

#include "mavloc/environment.hpp"
#include "mavloc/rng.hpp"

using namespace mavloc;

namespace {

Environment square_room(double side = 5.0, double gamma = 0.5, int order = 1) {
  return Environment({Vec2{0, 0}, Vec2{side, 0}, Vec2{side, side}, Vec2{0, side}}, gamma, order);
}

// Independent oracle: for an axis-aligned rectangle the 1D mirror lattice is
// known in closed form. Along one axis of length L with source offset a, the
// images are 2mL + a (|2m| reflections) and 2mL - a (|2m - 1| reflections);
// 2D order-n images combine axis counts with n_x + n_y = n.
std::vector<Vec2> rect_lattice_images(double x0, double x1, double y0, double y1, Vec2 p, int order) {
  auto axis_images = [](double lo, double hi, double coord, int count) {
    std::vector<double> out;
    const double len = hi - lo;
    const double a = coord - lo;
    for (int m = -count - 1; m <= count + 1; ++m) {
      if (std::abs(2 * m) == count) out.push_back(lo + 2 * m * len + a);
      if (std::abs(2 * m - 1) == count) out.push_back(lo + 2 * m * len - a);
    }
    return out;
  };
  std::vector<Vec2> out;
  for (int nx = 0; nx <= order; ++nx) {
    const int ny = order - nx;
    for (double x : axis_images(x0, x1, p.x, nx))
      for (double y : axis_images(y0, y1, p.y, ny)) out.push_back({x, y});
  }
  return out;
}

bool same_point_set(std::vector<Vec2> a, std::vector<Vec2> b, double tol) {
  if (a.size() != b.size()) return false;
  for (const Vec2& p : a) {
    auto it = std::find_if(b.begin(), b.end(), [&](const Vec2& q) { return distance(p, q) < tol; });
    if (it == b.end()) return false;
    b.erase(it);
  }
  return true;
}

}  // namespace

TEST_CASE("reflect_point mirrors across the infinite wall line") {
  const Wall left{{0, 0}, {0, 5}};
  const Vec2 r = reflect_point({1, 2}, left);
  CHECK(r.x == Catch::Approx(-1.0));
  CHECK(r.y == Catch::Approx(2.0));

  const Wall top{{0, 5}, {9, 5}};
  const Vec2 r2 = reflect_point({1, 2}, top);
  CHECK(r2.x == Catch::Approx(1.0));
  CHECK(r2.y == Catch::Approx(8.0));

  const Vec2 on_line = reflect_point({0, 3}, left);
  CHECK(on_line.x == Catch::Approx(0.0).margin(1e-15));
  CHECK(on_line.y == Catch::Approx(3.0));

  auto rng = derive_stream(11, 0);
  for (int i = 0; i < 30; ++i) {
    const Wall w{{uniform01(rng), uniform01(rng)}, {1 + uniform01(rng), uniform01(rng) - 2}};
    const Vec2 p{uniform01(rng) * 6 - 3, uniform01(rng) * 6 - 3};
    const Vec2 back = reflect_point(reflect_point(p, w), w);
    CHECK(distance(back, p) <= 1e-12);
  }
}

TEST_CASE("image sources: first orders of a square room") {
  const Environment env = square_room();
  const Vec2 xi{1, 2};

  const auto order0 = image_sources(env, xi, 0);
  REQUIRE(order0.size() == 1);
  CHECK(order0[0].order == 0);
  CHECK(order0[0].weight == 1.0);
  CHECK(distance(order0[0].position, xi) == 0.0);

  const auto order1 = image_sources(env, xi, 1);
  REQUIRE(order1.size() == 5);
  std::vector<Vec2> got;
  for (const auto& im : order1)
    if (im.order == 1) {
      got.push_back(im.position);
      CHECK(im.weight == Catch::Approx(0.5));
    }
  CHECK(same_point_set(got, {{-1, 2}, {1, -2}, {9, 2}, {1, 8}}, 1e-12));

  const auto order2 = image_sources(env, xi, 2);
  int n2 = 0;
  for (const auto& im : order2) n2 += im.order == 2;
  CHECK(n2 == 8);
}

TEST_CASE("image sources match the rectangle lattice oracle") {
  const Environment env({Vec2{0.5, -1}, Vec2{6.5, -1}, Vec2{6.5, 2.5}, Vec2{0.5, 2.5}}, 0.3, 3);
  const Vec2 xi{1.7, 0.9};
  const auto images = image_sources(env, xi, 3);
  for (int order = 1; order <= 3; ++order) {
    std::vector<Vec2> got;
    for (const auto& im : images)
      if (im.order == order) {
        got.push_back(im.position);
        CHECK(im.weight == Catch::Approx(std::pow(0.3, order)));
      }
    CHECK(got.size() == static_cast<std::size_t>(4 * order));
    const auto want = rect_lattice_images(0.5, 6.5, -1.0, 2.5, xi, order);
    CHECK(same_point_set(got, want, 1e-9));
  }
}

TEST_CASE("image sources with gamma = 0 carry zero weight beyond order 0") {
  const Environment env = square_room(5.0, 0.0, 2);
  for (const auto& im : image_sources(env, {2, 2}, 2))
    CHECK(im.weight == (im.order == 0 ? 1.0 : 0.0));
}

TEST_CASE("image sources reject outside points") {
  const Environment env = square_room();
  CHECK_THROWS_AS(image_sources(env, {7, 2}, 1), OutsideEnvironment);
  CHECK_THROWS_AS(image_sources(env, {0, 0}, 1), OutsideEnvironment);  // boundary is outside
}

TEST_CASE("perturb_scale") {
  const Environment env = square_room();
  const Environment same = perturb_scale(env, 1.0);
  for (int i = 0; i < 4; ++i) CHECK(distance(same.vertices[i], env.vertices[i]) == 0.0);

  const Environment big = perturb_scale(env, 4.0);
  CHECK(big.area() == Catch::Approx(100.0));
  CHECK(distance(big.centroid(), env.centroid()) <= 1e-12);
  CHECK(big.vertices[0].x == Catch::Approx(-2.5));

  const Environment half = perturb_scale(env, 0.5);
  CHECK(half.area() == Catch::Approx(0.5 * env.area()).epsilon(1e-12));
}

TEST_CASE("perturb_aspect") {
  const Environment env = square_room();
  const Environment same = perturb_aspect(env, 1.0);
  for (int i = 0; i < 4; ++i) CHECK(distance(same.vertices[i], env.vertices[i]) == 0.0);

  const Environment wide = perturb_aspect(env, 4.0);
  CHECK(wide.vertices[1].x - wide.vertices[0].x == Catch::Approx(10.0));
  CHECK(wide.vertices[2].y - wide.vertices[1].y == Catch::Approx(2.5));
  CHECK(wide.area() == Catch::Approx(env.area()).epsilon(1e-9));

  const Environment r2 = perturb_aspect(env, 2.0);
  CHECK(r2.area() == Catch::Approx(env.area()).epsilon(1e-9));

  const Environment sheared = perturb_shear(env, 10.0);
  CHECK_THROWS_AS(perturb_aspect(sheared, 2.0), NotRectangular);
}

TEST_CASE("perturb_shear") {
  const Environment unit({Vec2{0, 0}, Vec2{1, 0}, Vec2{1, 1}, Vec2{0, 1}}, 0.5, 1);
  const Environment same = perturb_shear(unit, 0.0);
  for (int i = 0; i < 4; ++i) CHECK(distance(same.vertices[i], unit.vertices[i]) == 0.0);

  const Environment sheared = perturb_shear(unit, 45.0);
  CHECK(distance(sheared.vertices[0], {0, 0}) <= 1e-12);
  CHECK(distance(sheared.vertices[1], {1, 0}) <= 1e-12);
  CHECK(distance(sheared.vertices[2], {2, 1}) <= 1e-9);
  CHECK(distance(sheared.vertices[3], {1, 1}) <= 1e-9);

  CHECK(perturb_shear(unit, 30.0).area() == Catch::Approx(unit.area()).epsilon(1e-9));
}

TEST_CASE("viable_region offsets the room inward") {
  const Environment env = square_room();
  const Environment all = viable_region(env, 0.0);
  for (int i = 0; i < 4; ++i) CHECK(distance(all.vertices[i], env.vertices[i]) == 0.0);

  const Environment margin = viable_region(env, 0.93);
  CHECK(margin.vertices[0].x == Catch::Approx(0.93));
  CHECK(margin.vertices[0].y == Catch::Approx(0.93));
  CHECK(margin.vertices[2].x == Catch::Approx(4.07));
  CHECK(margin.vertices[2].y == Catch::Approx(4.07));

  CHECK_THROWS_AS(viable_region(env, 3.0), EmptyRegion);
}
