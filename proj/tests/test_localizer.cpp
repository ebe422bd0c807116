// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include "mavloc/localizer.hpp"

using namespace mavloc;

namespace {

constexpr double kOmega = kTwoPi * 23.46;

SampleClock tiny_clock(int n = 96) {
  const double fs = 400.0;
  return SampleClock(fs, fs, n);  // encoder matches the audio span
}

Measurement random_measurement(const SampleClock& clock, int mics, std::uint64_t seed,
                               Vec2 position = {2.5, 2.5}, double azimuth = 0.4) {
  auto rng = derive_stream(seed, 0);
  Measurement m;
  m.pose = Pose2(azimuth, position);
  m.mics.clock = clock;
  m.mics.samples.resize(mics, clock.n_samples);
  for (int c = 0; c < mics; ++c)
    for (int n = 0; n < clock.n_samples; ++n) m.mics.samples(c, n) = gaussian(rng);
  m.phases.clock = clock;
  m.phases.samples.resize(kNumRotors, clock.encoder_samples());
  for (int r = 0; r < kNumRotors; ++r)
    for (int n = 0; n < clock.encoder_samples(); ++n) m.phases.samples(r, n) = 0.1 * gaussian(rng);
  return m;
}

RotorSourceModel tiny_rotor_model(std::uint64_t seed) {
  auto rng = derive_stream(seed, 0);
  RotorSourceModel m;
  m.omega = kOmega;
  for (int i = 0; i < 3; ++i) {
    PointSource s;
    const double a = kTwoPi * i / 3.0;
    s.position = {0.2 * std::cos(a), 0.2 * std::sin(a)};
    s.harmonics.push_back({1.0, 0.5 + uniform01(rng), wrap_angle(uniform01(rng) * kTwoPi)});
    s.harmonics.push_back({2.0, 0.3 * uniform01(rng), wrap_angle(uniform01(rng) * kTwoPi)});
    m.sources.push_back(std::move(s));
  }
  return m;
}

Scene tiny_scene() {
  Scene scene;
  scene.env = Environment({Vec2{0, 0}, Vec2{5, 0}, Vec2{5, 5}, Vec2{0, 5}}, 0.5, 1);
  scene.geom = default_setup().geom;
  scene.rotor = tiny_rotor_model(71);
  scene.mics.positions = {{0.91, 0.0}, {-0.455, 0.788}, {-0.455, -0.788}};
  const double fs = 129.0 * kDefaultOmegaRps;
  scene.clock = SampleClock(fs, fs, 129);
  return scene;
}

MeasurementSet simulate_set(const Scene& scene, const PhaseParams& phases,
                            const std::vector<Pose2>& poses, int n_train, int n_val) {
  MeasurementSet set;
  const PhaseTrace enc = sample_encoder(phases, scene.clock);
  for (const Pose2& pose : poses)
    set.items.push_back({pose, simulate_mics(scene, pose, phases), enc});
  for (int i = 0; i < n_train; ++i) set.train.push_back(i);
  for (int i = 0; i < n_val; ++i) set.val.push_back(n_train + i);
  return set;
}

}  // namespace

TEST_CASE("model topology and deterministic prediction") {
  const SampleClock clock = tiny_clock();
  const LocalizerModel model = LocalizerModel::make(clock, 2, kNumRotors, FeatureConfig{}, 16, 5);
  CHECK(model.audio_frames == 2);
  CHECK(model.phase_frames == 2);
  CHECK(model.input_dim() == (2 + kNumRotors) * 3 * 33 + 2);

  const Measurement m = random_measurement(clock, 2, 81);
  const Vec2 a = predict(model, m.mics, m.phases, m.pose.azimuth);
  const Vec2 b = predict(model, m.mics, m.phases, m.pose.azimuth);
  CHECK(a.x == b.x);
  CHECK(a.y == b.y);
  CHECK(a.finite());

  const Measurement wrong = random_measurement(tiny_clock(128), 2, 82);
  CHECK_THROWS_AS(predict(model, wrong.mics, wrong.phases, 0.0), ShapeMismatch);
}

TEST_CASE("single sample is memorized") {
  const SampleClock clock = tiny_clock();
  const LocalizerModel init = LocalizerModel::make(clock, 2, kNumRotors, FeatureConfig{}, 32, 6);

  MeasurementSet data;
  data.items.push_back(random_measurement(clock, 2, 83, {1.8, 3.2}));
  data.train = {0};

  TrainConfig cfg;
  cfg.epochs = 800;
  cfg.batch_size = 1;
  cfg.learning_rate = 3e-3;
  cfg.seed = 0;
  const TrainResult res = train_localizer(data, init, cfg);
  CHECK(res.history.back().train_data < 1e-4);
}

TEST_CASE("training is seed-deterministic") {
  const Scene scene = tiny_scene();
  const PhaseParams phases = preset("slow_sine", kOmega);
  std::vector<Pose2> poses;
  for (int i = 0; i < 6; ++i) poses.emplace_back(0.3 * i, Vec2{1.5 + 0.4 * i, 2.0 + 0.3 * i});
  const MeasurementSet data = simulate_set(scene, phases, poses, 4, 2);
  const LocalizerModel init =
      LocalizerModel::make(scene.clock, 3, kNumRotors, FeatureConfig{}, 16, 7);

  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.batch_size = 2;
  cfg.seed = 12345;
  const TrainResult a = train_localizer(data, init, cfg);
  const TrainResult b = train_localizer(data, init, cfg);
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    CHECK(a.history[i].train_data == b.history[i].train_data);
    CHECK(a.history[i].val_loss == b.history[i].val_loss);
  }
  CHECK(a.model.params.w1 == b.model.params.w1);
  CHECK(a.model.params.emb_time == b.model.params.emb_time);
}

TEST_CASE("estimator gradients match finite differences") {
  const SampleClock clock = tiny_clock();
  LocalizerModel model = LocalizerModel::make(clock, 2, kNumRotors, FeatureConfig{}, 8, 9);
  // Non-zero embeddings so their gradient paths are exercised.
  auto rng = derive_stream(91, 0);
  for_each_block(model.params, [&](auto& blk) {
    for (Eigen::Index i = 0; i < blk.size(); ++i) blk.data()[i] += 0.05 * (uniform01(rng) - 0.5);
  });

  std::vector<detail::SampleFeat> feats;
  std::vector<Vec2> labels;
  std::vector<int> idx;
  for (int i = 0; i < 3; ++i) {
    const Measurement m = random_measurement(clock, 2, 92 + i, {1.0 + i, 2.0 - 0.3 * i}, 0.2 * i);
    feats.push_back(detail::extract_features(model, m.mics, m.phases, m.pose.azimuth));
    labels.push_back(m.pose.position);
    idx.push_back(i);
  }
  Eigen::MatrixXd targets(2, 3);
  for (int i = 0; i < 3; ++i) {
    targets(0, i) = labels[i].x;
    targets(1, i) = labels[i].y;
  }

  auto loss_at = [&](const LocalizerModel& m) {
    const Eigen::MatrixXd x = detail::assemble_inputs(m, feats, idx);
    detail::ForwardCache fc;
    detail::forward_batch(m, x, fc);
    return (fc.out - targets).squaredNorm() / 3.0;
  };

  const Eigen::MatrixXd x = detail::assemble_inputs(model, feats, idx);
  detail::ForwardCache fc;
  detail::forward_batch(model, x, fc);
  ModelBlocks grads = model.zero_grads();
  Eigen::MatrixXd dx;
  detail::backward_batch(model, fc, targets, grads, dx);

  const double step = 1e-5;
  auto check_block = [&](auto& param, const auto& grad, int count) {
    auto probe_rng = derive_stream(95, reinterpret_cast<std::uintptr_t>(&param));
    for (int c = 0; c < count; ++c) {
      const Eigen::Index i = static_cast<Eigen::Index>(bounded(probe_rng, param.size()));
      const double saved = param.data()[i];
      param.data()[i] = saved + step;
      const double fp = loss_at(model);
      param.data()[i] = saved - step;
      const double fm = loss_at(model);
      param.data()[i] = saved;
      const double fd = (fp - fm) / (2 * step);
      CHECK(grad.data()[i] == Catch::Approx(fd).epsilon(1e-3).margin(1e-8));
    }
  };
  check_block(model.params.w1, grads.w1, 12);
  check_block(model.params.w2, grads.w2, 12);
  check_block(model.params.w3, grads.w3, 6);
  check_block(model.params.b1, grads.b1, 6);
  check_block(model.params.b3, grads.b3, 2);
  check_block(model.params.emb_time, grads.emb_time, 8);
  check_block(model.params.emb_mic, grads.emb_mic, 6);
  check_block(model.params.emb_rotor, grads.emb_rotor, 6);
}

TEST_CASE("degenerate joint schedule reduces to plain training") {
  const Scene scene = tiny_scene();
  const PhaseParams constant = preset("constant", kOmega);

  SplitPoses poses;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 2; ++j) poses.train.emplace_back(kPi * j / 2.0, Vec2{1.6 + 0.5 * i, 2.2 + 0.4 * j});
  poses.val.emplace_back(0.7, Vec2{2.9, 2.1});
  poses.val.emplace_back(-1.2, Vec2{1.9, 3.1});

  // Static dataset generated with the same simulator and phases.
  std::vector<Pose2> all = poses.train;
  all.insert(all.end(), poses.val.begin(), poses.val.end());
  const MeasurementSet data =
      simulate_set(scene, constant, all, static_cast<int>(poses.train.size()),
                   static_cast<int>(poses.val.size()));

  const LocalizerModel init =
      LocalizerModel::make(scene.clock, 3, kNumRotors, FeatureConfig{}, 16, 11);

  TrainConfig cfg;
  cfg.epochs = 4;
  cfg.batch_size = 3;
  cfg.seed = 7;
  cfg.freezing_cycle_epochs = 0;
  cfg.joint_epochs = 0;
  cfg.final_frozen_epochs = 4;

  const TrainResult plain = train_localizer(data, init, cfg);
  const JointResult joint = train_joint(scene, poses, constant, init, cfg, ConstraintConfig{});

  REQUIRE(joint.history.size() == plain.history.size());
  for (std::size_t i = 0; i < plain.history.size(); ++i) {
    CHECK(joint.history[i].train_data == plain.history[i].train_data);
    CHECK(joint.history[i].val_loss == plain.history[i].val_loss);
  }
  CHECK(joint.model.params.w1 == plain.model.params.w1);
  CHECK(joint.model.params.b3 == plain.model.params.b3);
  CHECK(joint.phases.beta == constant.beta);
}

TEST_CASE("joint training runs the freezing schedule and keeps phases physical") {
  const Scene scene = tiny_scene();
  const PhaseParams init_phases = preset("constant", kOmega);

  SplitPoses poses;
  for (int i = 0; i < 6; ++i) poses.train.emplace_back(0.5 * i, Vec2{1.5 + 0.45 * i, 2.4});
  poses.val.emplace_back(0.2, Vec2{2.2, 2.9});

  const LocalizerModel init =
      LocalizerModel::make(scene.clock, 3, kNumRotors, FeatureConfig{}, 16, 13);

  TrainConfig cfg;
  cfg.batch_size = 3;
  cfg.seed = 3;
  cfg.freezing_cycle_epochs = 1;
  cfg.joint_epochs = 1;
  cfg.final_frozen_epochs = 1;
  const ConstraintConfig ccfg;

  const JointResult res = train_joint(scene, poses, init_phases, init, cfg, ccfg);
  CHECK(res.history.size() == static_cast<std::size_t>(cfg.joint_total_epochs()));
  CHECK(res.phases.beta.allFinite());
  // Phase coefficients moved away from the constant preset.
  CHECK(res.phases.beta.cwiseAbs().maxCoeff() > 0.0);
  // Loss decomposition: total = data + physics.
  for (const EpochStats& row : res.history)
    CHECK(row.train_total == Catch::Approx(row.train_data + row.train_phys).margin(1e-9));

  const auto grid = penalty_time_grid(res.phases.period);
  CHECK(penalty_omega(res.phases, ccfg, grid) == 0.0);
  CHECK(penalty_alpha(res.phases, ccfg, grid) == 0.0);
}

TEST_CASE("matched field baseline basics") {
  const Scene scene = tiny_scene();
  const PhaseParams phases = preset("slow_sine", kOmega);

  const std::vector<Vec2> grid{{1.5, 1.5}, {2.5, 2.5}, {3.5, 3.5}};

  PressureTrace zero;
  zero.clock = scene.clock;
  zero.samples = Eigen::MatrixXd::Zero(3, scene.clock.n_samples);
  const Vec2 tie = matched_field_localize(zero, phases, 0.0, scene, grid);
  CHECK(tie.x == grid[0].x);  // all-zero correlations tie-break to the lowest index

  const PressureTrace probe = simulate_mics(scene, Pose2(0.8, grid[1]), phases);
  const Vec2 single = matched_field_localize(probe, phases, 0.8, scene, {grid[2]});
  CHECK(single.x == grid[2].x);

  const Vec2 found = matched_field_localize(probe, phases, 0.8, scene, grid);
  CHECK(found.x == grid[1].x);
  CHECK(found.y == grid[1].y);
}

TEST_CASE("train_localizer input validation") {
  const SampleClock clock = tiny_clock();
  const LocalizerModel init = LocalizerModel::make(clock, 2, kNumRotors);
  CHECK_THROWS_AS(train_localizer(MeasurementSet{}, init, TrainConfig{}), ConfigError);
}
