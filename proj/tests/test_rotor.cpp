// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include "mavloc/rotor.hpp"

using namespace mavloc;

namespace {

PointSource single_harmonic_source(Vec2 pos, double k, double amplitude, double phase) {
  PointSource s;
  s.position = pos;
  s.harmonics.push_back({k, amplitude, phase});
  return s;
}

RotorSourceModel single_source_model(double omega, double k = 1.0, double amplitude = 1.0,
                                     double phase = 0.0) {
  RotorSourceModel m;
  m.omega = omega;
  m.sources.push_back(single_harmonic_source({0, 0}, k, amplitude, phase));
  return m;
}

}  // namespace

TEST_CASE("source signal evaluation") {
  PointSource s = single_harmonic_source({0, 0}, 1.0, 1.0, 0.0);
  CHECK(eval_source_signal(s, 100.0, 0.0) == Catch::Approx(1.0));

  s.harmonics[0].phase = kPi / 2;
  CHECK(eval_source_signal(s, 100.0, 0.0) == Catch::Approx(0.0).margin(1e-15));

  PointSource half = single_harmonic_source({0, 0}, 0.5, 2.0, 0.0);
  CHECK(eval_source_signal(half, kPi, 1.0) == Catch::Approx(-2.0));
}

TEST_CASE("free-space field: delay, decay and phase shift") {
  const double c = kDefaultSpeedOfSound;
  const RotorSourceModel m = single_source_model(2.0 * kPi * 20.0);

  // At exactly one propagation delay the cosine argument is zero.
  CHECK(eval_rotor_field(m, {1, 0}, 1.0 / c, 0.0, c) == Catch::Approx(1.0 / (4 * kPi)));
  CHECK(eval_rotor_field(m, {2, 0}, 2.0 / c, 0.0, c) == Catch::Approx(1.0 / (8 * kPi)));

  // A phase shift of pi/2 delays the signal by (pi/2)/omega and flips the
  // k=1 cosine at the matched sample time.
  CHECK(eval_rotor_field(m, {1, 0}, 1.0 / c, kPi / 2, c) == Catch::Approx(-1.0 / (4 * kPi)));

  CHECK_THROWS_AS(eval_rotor_field(m, {0, 0}, 0.0), DegenerateGeometry);
}

TEST_CASE("field periodicity follows the harmonic grid") {
  const double omega = 2.0 * kPi * 23.46;
  RotorSourceModel m;
  m.omega = omega;
  PointSource s;
  s.position = {0.1, -0.05};
  s.harmonics.push_back({1.0, 0.7, 0.3});
  s.harmonics.push_back({2.0, 0.2, -1.2});
  s.harmonics.push_back({3.0, 0.1, 2.0});
  m.sources.push_back(s);

  const Vec2 x{1.3, 0.4};
  for (int i = 0; i < 10; ++i) {
    const double t = 0.013 * i;
    CHECK(eval_rotor_field(m, x, t + kPi / omega) ==
          Catch::Approx(eval_rotor_field(m, x, t)).epsilon(1e-9));
  }

  // Adding the half harmonic doubles the period.
  m.sources[0].harmonics.insert(m.sources[0].harmonics.begin(), {0.5, 0.4, 0.0});
  const double t0 = 0.0071;
  CHECK(eval_rotor_field(m, x, t0 + 2 * kPi / omega) ==
        Catch::Approx(eval_rotor_field(m, x, t0)).epsilon(1e-9));
}

TEST_CASE("far-field envelope decays as 1/d") {
  const RotorSourceModel m = single_source_model(2.0 * kPi * 20.0);
  const double c = kDefaultSpeedOfSound;
  auto peak = [&](double d) {
    double best = 0.0;
    for (int i = 0; i <= 400; ++i) {
      const double t = d / c + i * (kPi / m.omega) / 400.0;
      best = std::max(best, std::abs(eval_rotor_field(m, {d, 0}, t, 0.0, c)));
    }
    return best;
  };
  CHECK(peak(2.0) / peak(1.0) == Catch::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("default rotor model layout") {
  const RotorSourceModel m = default_rotor_model(2.0 * kPi * 23.46);
  REQUIRE(m.sources.size() == 256);
  CHECK(m.parameter_count() == 2048);
  CHECK(m.sources[0].position.x == Catch::Approx(0.23));
  CHECK(m.sources[0].position.y == Catch::Approx(0.0).margin(1e-15));
  for (const auto& s : m.sources) {
    REQUIRE(s.harmonics.size() == 4);
    CHECK(s.harmonics[0].k == 0.5);
    CHECK(s.harmonics[3].k == 3.0);
  }
  // 1/k^2 amplitude decay, outer ring scaled by 0.25.
  CHECK(m.sources[0].harmonics[1].amplitude == Catch::Approx(1.0));
  CHECK(m.sources[0].harmonics[0].amplitude == Catch::Approx(4.0));
  CHECK(m.sources[128].harmonics[1].amplitude == Catch::Approx(0.25));

  const RotorSourceModel again = default_rotor_model(2.0 * kPi * 23.46);
  CHECK(again.sources[37].harmonics[2].phase == m.sources[37].harmonics[2].phase);
  CHECK_NOTHROW(validate(m));
}

namespace {

RotorSourceModel four_source_model(double omega) {
  RotorSourceModel m;
  m.omega = omega;
  for (int i = 0; i < 4; ++i) {
    const double a = kTwoPi * i / 4.0;
    PointSource s;
    s.position = {0.2 * std::cos(a), 0.2 * std::sin(a)};
    s.harmonics.push_back({1.0, 0.8 - 0.1 * i, wrap_angle(0.4 * i)});
    s.harmonics.push_back({2.0, 0.3 + 0.05 * i, wrap_angle(-0.7 * i)});
    m.sources.push_back(s);
  }
  return m;
}

std::vector<RotorFitTarget> synth_targets(const RotorSourceModel& m, int n_positions, int n_samples) {
  const SampleClock clock(n_samples * m.omega / (2 * kPi) / 2.0, 1000.0, n_samples);
  std::vector<RotorFitTarget> targets;
  for (int i = 0; i < n_positions; ++i) {
    const double a = kTwoPi * i / n_positions + 0.1;
    RotorFitTarget t;
    t.position = {1.0 * std::cos(a), 1.0 * std::sin(a)};
    t.trace.clock = clock;
    t.trace.samples.resize(1, n_samples);
    for (int n = 0; n < n_samples; ++n)
      t.trace.samples(0, n) = eval_rotor_field(m, t.position, n / clock.f_s, 0.0, clock.c);
    targets.push_back(std::move(t));
  }
  return targets;
}

}  // namespace

TEST_CASE("fit gradient matches finite differences") {
  const RotorSourceModel m = four_source_model(2.0 * kPi * 20.0);
  const auto targets = synth_targets(m, 3, 64);

  RotorSourceModel probe = m;
  for (auto& s : probe.sources)
    for (auto& h : s.harmonics) {
      h.amplitude *= 1.07;
      h.phase += 0.13;
    }

  Eigen::VectorXd grad;
  const double f0 = detail::rotor_fit_objective(probe, targets, &grad);
  CHECK(f0 > 0.0);

  Eigen::VectorXd x = detail::pack_rotor_params(probe);
  const double step = 1e-6;
  double max_scale = grad.lpNorm<Eigen::Infinity>();
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    RotorSourceModel work = probe;
    Eigen::VectorXd xp = x, xm = x;
    xp[i] += step;
    xm[i] -= step;
    detail::unpack_rotor_params(xp, work);
    const double fp = detail::rotor_fit_objective(work, targets, nullptr);
    detail::unpack_rotor_params(xm, work);
    const double fm = detail::rotor_fit_objective(work, targets, nullptr);
    const double fd = (fp - fm) / (2 * step);
    CHECK(std::abs(grad[i] - fd) <= 1e-4 * std::max(std::abs(fd), 1e-6 * max_scale));
  }
}

TEST_CASE("fit is a fixed point at the generating model") {
  const RotorSourceModel m = four_source_model(2.0 * kPi * 20.0);
  const auto targets = synth_targets(m, 4, 64);
  const RotorFitResult res = fit_rotor_model(targets, m);
  CHECK(res.misfit <= 1e-12);
  const Eigen::VectorXd before = detail::pack_rotor_params(m);
  const Eigen::VectorXd after = detail::pack_rotor_params(res.model);
  CHECK((before - after).lpNorm<Eigen::Infinity>() <= 1e-9);
}

TEST_CASE("fit recovers scaled amplitudes") {
  const RotorSourceModel truth = four_source_model(2.0 * kPi * 20.0);
  const auto targets = synth_targets(truth, 6, 128);

  RotorSourceModel init = truth;
  for (auto& s : init.sources)
    for (auto& h : s.harmonics) h.amplitude *= 1.1;

  const RotorFitResult res = fit_rotor_model(targets, init);
  CHECK(res.converged);
  for (std::size_t si = 0; si < truth.sources.size(); ++si)
    for (std::size_t hi = 0; hi < truth.sources[si].harmonics.size(); ++hi) {
      const double want = truth.sources[si].harmonics[hi].amplitude;
      const double got = res.model.sources[si].harmonics[hi].amplitude;
      CHECK(std::abs(got - want) <= 0.01 * std::abs(want));
    }
}

TEST_CASE("fit rejects bad inputs") {
  const RotorSourceModel m = four_source_model(2.0 * kPi * 20.0);
  CHECK_THROWS_AS(fit_rotor_model({}, m), ConfigError);

  auto targets = synth_targets(m, 2, 16);
  targets[0].position = {0.3, 0.0};  // inside the unmodeled near field
  CHECK_THROWS_AS(fit_rotor_model(targets, m), ConfigError);
}
