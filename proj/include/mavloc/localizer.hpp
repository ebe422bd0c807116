// SPDX-License-Identifier: Apache-2.0
//
// Location estimator and training loops.
//
// The estimator time-pools each microphone's STFT feature vectors (with the
// learned time embedding summed in before pooling and the microphone
// embedding added to the pool), does the same for the encoder phase traces
// with rotor embeddings, concatenates the per-channel pools with the azimuth
// encoded as (sin, cos), and maps through a two-hidden-layer ReLU network to
// the 2D location. Pooling is over the frame axis only: microphone identity
// and inter-microphone phase structure carry most of the positional
// information, so channels are concatenated rather than averaged away.
//
// Joint training alternates per-rotor phase-coefficient optimization with
// joint fine-tuning, then freezes the phases for the final stage. Phase
// gradients flow through the analytic forward-model adjoint plus the
// physical-constraint penalty; the estimator parameters are updated at every
// step. All shuffling and noise draws come from (seed, tag) derived streams,
// so identical configurations reproduce bit-identical results.

#pragma once

#include <optional>

#include "mavloc/aircraft.hpp"
#include "mavloc/features.hpp"
#include "mavloc/noise.hpp"

namespace mavloc {

// ---------------------------------------------------------------------------
// Model.

struct ModelBlocks {
  Eigen::MatrixXd emb_time, emb_mic, emb_rotor;
  Eigen::MatrixXd w1, w2, w3;
  Eigen::VectorXd b1, b2, b3;
};

template <typename Blocks, typename F>
void for_each_block(Blocks& blocks, F&& f) {
  f(blocks.emb_time);
  f(blocks.emb_mic);
  f(blocks.emb_rotor);
  f(blocks.w1);
  f(blocks.b1);
  f(blocks.w2);
  f(blocks.b2);
  f(blocks.w3);
  f(blocks.b3);
}

template <typename A, typename B, typename F>
void for_each_block_pair(A& a, B& b, F&& f) {
  f(a.emb_time, b.emb_time);
  f(a.emb_mic, b.emb_mic);
  f(a.emb_rotor, b.emb_rotor);
  f(a.w1, b.w1);
  f(a.b1, b.b1);
  f(a.w2, b.w2);
  f(a.b2, b.b2);
  f(a.w3, b.w3);
  f(a.b3, b.b3);
}

/// Estimator input encoding: contract STFT sizes with magnitude-gated phase
/// channels, which keep near-empty bins from injecting unit-norm noise.
inline FeatureConfig default_localizer_features() {
  FeatureConfig fc;
  fc.magnitude_gated_phase = true;
  return fc;
}

struct LocalizerModel {
  FeatureConfig features;
  int mics = 0;
  int rotors = 0;
  int audio_samples = 0;
  int encoder_samples = 0;
  int audio_frames = 0;
  int phase_frames = 0;
  int hidden = 256;
  ModelBlocks params;

  int feat_dim() const { return features.feature_dim(); }
  int emb_frames() const { return std::max(audio_frames, phase_frames); }
  int input_dim() const { return (mics + rotors) * feat_dim() + 2; }

  static LocalizerModel make(const SampleClock& clock, int mics, int rotors,
                             const FeatureConfig& fc = default_localizer_features(),
                             int hidden = 256, std::uint64_t seed = 0) {
    fc.validate();
    LocalizerModel m;
    m.features = fc;
    m.mics = mics;
    m.rotors = rotors;
    m.audio_samples = clock.n_samples;
    m.encoder_samples = clock.encoder_samples();
    m.audio_frames = stft_frames(m.audio_samples, fc);
    m.phase_frames = stft_frames(m.encoder_samples, fc);
    m.hidden = hidden;

    const int d = m.feat_dim();
    m.params.emb_time = Eigen::MatrixXd::Zero(d, m.emb_frames());
    m.params.emb_mic = Eigen::MatrixXd::Zero(d, mics);
    m.params.emb_rotor = Eigen::MatrixXd::Zero(d, rotors);

    auto rng = derive_stream(seed, 0xC0DEull);
    auto xavier = [&rng](int rows, int cols) {
      Eigen::MatrixXd w(rows, cols);
      const double limit = std::sqrt(6.0 / (rows + cols));
      for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) w(i, j) = (2.0 * uniform01(rng) - 1.0) * limit;
      return w;
    };
    m.params.w1 = xavier(hidden, m.input_dim());
    m.params.b1 = Eigen::VectorXd::Zero(hidden);
    m.params.w2 = xavier(hidden, hidden);
    m.params.b2 = Eigen::VectorXd::Zero(hidden);
    m.params.w3 = xavier(2, hidden);
    m.params.b3 = Eigen::VectorXd::Zero(2);
    return m;
  }

  ModelBlocks zero_grads() const {
    ModelBlocks g = params;
    for_each_block(g, [](auto& blk) { blk.setZero(); });
    return g;
  }
};

// ---------------------------------------------------------------------------
// Feature assembly.

namespace detail {

struct SampleFeat {
  Eigen::VectorXd fa;  // time-pooled audio features, mic-major blocks (mics * feat_dim)
  Eigen::VectorXd fp;  // time-pooled phase features, rotor-major blocks (rotors * feat_dim)
  double sin_az = 0.0, cos_az = 1.0;
};

inline void check_shapes(const LocalizerModel& m, const PressureTrace& p, const PhaseTrace& phi_trace) {
  if (p.mics() != m.mics || p.length() != m.audio_samples)
    throw ShapeMismatch("predict: pressure trace shape does not match the model topology");
  if (phi_trace.rotors() != m.rotors || phi_trace.length() != m.encoder_samples)
    throw ShapeMismatch("predict: phase trace shape does not match the model topology");
}

inline Eigen::VectorXd flatten_rows(const Eigen::MatrixXd& m) {
  Eigen::VectorXd out(m.size());
  for (Eigen::Index r = 0; r < m.rows(); ++r) out.segment(r * m.cols(), m.cols()) = m.row(r);
  return out;
}

inline SampleFeat extract_features(const LocalizerModel& m, const PressureTrace& p,
                                   const PhaseTrace& phi_trace, double azimuth) {
  check_shapes(m, p, phi_trace);
  SampleFeat f;
  f.fa = flatten_rows(stft_features(p.samples, m.features).pooled_per_channel());
  f.fp = flatten_rows(stft_features(phi_trace.samples, m.features).pooled_per_channel());
  f.sin_az = std::sin(azimuth);
  f.cos_az = std::cos(azimuth);
  return f;
}

/// Time-embedding means: summed to every frame before pooling, the table
/// contributes its mean over the used frames to each channel block.
inline Eigen::VectorXd time_embed_mean(const LocalizerModel& m, int frames) {
  return m.params.emb_time.leftCols(frames).rowwise().mean();
}

inline Eigen::MatrixXd assemble_inputs(const LocalizerModel& m, const std::vector<SampleFeat>& feats,
                                       const std::vector<int>& indices) {
  const int d = m.feat_dim();
  const Eigen::VectorXd ta = time_embed_mean(m, m.audio_frames);
  const Eigen::VectorXd tp = time_embed_mean(m, m.phase_frames);
  const int phase_offset = m.mics * d;
  Eigen::MatrixXd x(m.input_dim(), indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const SampleFeat& f = feats[indices[i]];
    for (int mic = 0; mic < m.mics; ++mic)
      x.col(i).segment(mic * d, d) = f.fa.segment(mic * d, d) + ta + m.params.emb_mic.col(mic);
    for (int r = 0; r < m.rotors; ++r)
      x.col(i).segment(phase_offset + r * d, d) =
          f.fp.segment(r * d, d) + tp + m.params.emb_rotor.col(r);
    x(phase_offset + m.rotors * d, i) = f.sin_az;
    x(phase_offset + m.rotors * d + 1, i) = f.cos_az;
  }
  return x;
}

struct ForwardCache {
  Eigen::MatrixXd x, h1, h2, out;
};

inline void forward_batch(const LocalizerModel& m, const Eigen::MatrixXd& x, ForwardCache& fc) {
  fc.x = x;
  fc.h1 = ((m.params.w1 * x).colwise() + m.params.b1).cwiseMax(0.0);
  fc.h2 = ((m.params.w2 * fc.h1).colwise() + m.params.b2).cwiseMax(0.0);
  fc.out = (m.params.w3 * fc.h2).colwise() + m.params.b3;
}

/// Mean squared localization error of the batch plus parameter gradients;
/// returns the input cotangent for phase training.
inline double backward_batch(const LocalizerModel& m, const ForwardCache& fc,
                             const Eigen::MatrixXd& targets, ModelBlocks& grads,
                             Eigen::MatrixXd& dx) {
  const double batch = static_cast<double>(fc.x.cols());
  const Eigen::MatrixXd resid = fc.out - targets;
  const double loss = resid.squaredNorm() / batch;

  const Eigen::MatrixXd dout = (2.0 / batch) * resid;
  grads.w3 += dout * fc.h2.transpose();
  grads.b3 += dout.rowwise().sum();
  Eigen::MatrixXd dh2 =
      (m.params.w3.transpose() * dout).cwiseProduct((fc.h2.array() > 0.0).cast<double>().matrix());
  grads.w2 += dh2 * fc.h1.transpose();
  grads.b2 += dh2.rowwise().sum();
  Eigen::MatrixXd dh1 =
      (m.params.w2.transpose() * dh2).cwiseProduct((fc.h1.array() > 0.0).cast<double>().matrix());
  grads.w1 += dh1 * fc.x.transpose();
  grads.b1 += dh1.rowwise().sum();
  dx = m.params.w1.transpose() * dh1;

  // Embedding gradients: each channel block's cotangent flows one-to-one to
  // its channel embedding and, scaled by the pooling mean, to the time table.
  const int d = m.feat_dim();
  const int phase_offset = m.mics * d;
  Eigen::VectorXd ga = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd gp = Eigen::VectorXd::Zero(d);
  for (int mic = 0; mic < m.mics; ++mic) {
    const Eigen::VectorXd block = dx.middleRows(mic * d, d).rowwise().sum();
    grads.emb_mic.col(mic) += block;
    ga += block;
  }
  for (int r = 0; r < m.rotors; ++r) {
    const Eigen::VectorXd block = dx.middleRows(phase_offset + r * d, d).rowwise().sum();
    grads.emb_rotor.col(r) += block;
    gp += block;
  }
  for (int f = 0; f < m.audio_frames; ++f) grads.emb_time.col(f) += ga / m.audio_frames;
  for (int f = 0; f < m.phase_frames; ++f) grads.emb_time.col(f) += gp / m.phase_frames;
  return loss;
}

struct AdamState {
  ModelBlocks m, v;
  int t = 0;

  void init_like(const ModelBlocks& params) {
    m = params;
    v = params;
    for_each_block(m, [](auto& blk) { blk.setZero(); });
    for_each_block(v, [](auto& blk) { blk.setZero(); });
  }

  void step(ModelBlocks& params, const ModelBlocks& grads, double lr) {
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    ++t;
    const double c1 = 1.0 - std::pow(b1, t);
    const double c2 = 1.0 - std::pow(b2, t);
    auto update = [&](auto& p, auto& mm, auto& vv, const auto& g) {
      mm = b1 * mm + (1.0 - b1) * g;
      vv = b2 * vv + (1.0 - b2) * g.cwiseProduct(g);
      p -= lr * (mm / c1).cwiseQuotient(((vv / c2).cwiseSqrt().array() + eps).matrix());
    };
    update(params.emb_time, m.emb_time, v.emb_time, grads.emb_time);
    update(params.emb_mic, m.emb_mic, v.emb_mic, grads.emb_mic);
    update(params.emb_rotor, m.emb_rotor, v.emb_rotor, grads.emb_rotor);
    update(params.w1, m.w1, v.w1, grads.w1);
    update(params.b1, m.b1, v.b1, grads.b1);
    update(params.w2, m.w2, v.w2, grads.w2);
    update(params.b2, m.b2, v.b2, grads.b2);
    update(params.w3, m.w3, v.w3, grads.w3);
    update(params.b3, m.b3, v.b3, grads.b3);
  }
};

/// Adam over the phase-coefficient rows; rows are stepped independently so
/// the freezing schedule leaves frozen rotors' moments untouched.
struct RowAdam {
  Eigen::MatrixXd m, v;
  std::vector<int> t;

  void init(int rows, int cols) {
    m = Eigen::MatrixXd::Zero(rows, cols);
    v = Eigen::MatrixXd::Zero(rows, cols);
    t.assign(rows, 0);
  }

  void step_row(Eigen::MatrixXd& beta, const Eigen::MatrixXd& grad, int row, double lr) {
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    ++t[row];
    const double c1 = 1.0 - std::pow(b1, t[row]);
    const double c2 = 1.0 - std::pow(b2, t[row]);
    m.row(row) = b1 * m.row(row) + (1.0 - b1) * grad.row(row);
    v.row(row) = b2 * v.row(row) + (1.0 - b2) * grad.row(row).cwiseProduct(grad.row(row));
    beta.row(row) -=
        lr * (m.row(row) / c1).cwiseQuotient(((v.row(row) / c2).cwiseSqrt().array() + eps).matrix());
  }
};

}  // namespace detail

/// Deterministic location estimate from one measurement.
inline Vec2 predict(const LocalizerModel& model, const PressureTrace& p, const PhaseTrace& phi_trace,
                    double azimuth) {
  const detail::SampleFeat f = detail::extract_features(model, p, phi_trace, azimuth);
  const Eigen::MatrixXd x = detail::assemble_inputs(model, {f}, {0});
  detail::ForwardCache fc;
  detail::forward_batch(model, x, fc);
  const Vec2 out{fc.out(0, 0), fc.out(1, 0)};
  if (!out.finite()) throw NonFiniteLoss("predict: estimator produced a non-finite location");
  return out;
}

// ---------------------------------------------------------------------------
// Training.

struct MeasurementSet {
  std::vector<Measurement> items;
  std::vector<int> train, val, test;
};

struct SplitPoses {
  std::vector<Pose2> train, val, test;
};

struct TrainConfig {
  int epochs = 200;     // train_localizer only; joint training uses the schedule below
  int batch_size = 50;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  // Joint schedule: kNumRotors cycles of per-rotor phase optimization, then
  // joint fine-tuning, then phases frozen.
  int freezing_cycle_epochs = 25;
  int joint_epochs = 25;
  int final_frozen_epochs = 35;
  // Phase-coefficient optimizer settings (decay applied from the start of
  // the joint fine-tuning stage).
  double phase_learning_rate = 1e-3;
  double phase_lr_decay = 0.5;
  int phase_lr_decay_epochs = 20;
  std::optional<NoiseSchedule> noise_training;

  int joint_total_epochs() const {
    return kNumRotors * freezing_cycle_epochs + joint_epochs + final_frozen_epochs;
  }
};

struct EpochStats {
  int epoch = 0;
  double train_data = 0.0;
  double train_phys = 0.0;
  double train_total = 0.0;
  double val_loss = 0.0;
};
using TrainHistory = std::vector<EpochStats>;

struct TrainResult {
  LocalizerModel model;
  TrainHistory history;
};

struct JointResult {
  LocalizerModel model;
  PhaseParams phases;
  TrainHistory history;
};

namespace detail {

inline std::uint64_t stream_tag(std::uint64_t tag, std::uint64_t a, std::uint64_t b = 0) {
  return (tag << 56) ^ (a << 24) ^ b;
}
inline constexpr std::uint64_t kTagShuffle = 1;
inline constexpr std::uint64_t kTagBatchSnr = 2;
inline constexpr std::uint64_t kTagSampleNoise = 3;

class Trainer {
 public:
  Trainer(LocalizerModel model, const TrainConfig& cfg) : model_(std::move(model)), cfg_(cfg) {
    if (cfg.batch_size < 1 || cfg.epochs < 0 || cfg.learning_rate <= 0.0)
      throw ConfigError("TrainConfig: bad optimizer settings");
    opt_.init_like(model_.params);
  }

  TrainResult run_static(const MeasurementSet& data) {
    if (data.items.empty() || data.train.empty()) throw ConfigError("train_localizer: empty dataset");
    if (cfg_.noise_training && cfg_.noise_training->kind == NoiseKind::phase)
      throw ConfigError("train_localizer: phase-noise training requires joint training (no simulator)");

    std::vector<SampleFeat> feats(data.items.size());
    std::vector<Vec2> labels(data.items.size());
    for (std::size_t i = 0; i < data.items.size(); ++i) {
      feats[i] = extract_features(model_, data.items[i].mics, data.items[i].phases,
                                  data.items[i].pose.azimuth);
      labels[i] = data.items[i].pose.position;
    }
    std::vector<const Measurement*> raw(data.items.size());
    for (std::size_t i = 0; i < data.items.size(); ++i) raw[i] = &data.items[i];

    TrainHistory history;
    static_epochs(0, cfg_.epochs, feats, raw, labels, data.train, data.val, 0.0, history);
    return {best_or_final(), std::move(history)};
  }

  JointResult run_joint(const Scene& scene, const SplitPoses& poses, PhaseParams phases,
                        const ConstraintConfig& ccfg) {
    if (poses.train.empty()) throw ConfigError("train_joint: empty training pose set");
    ccfg.validate();
    detail::check_phase_compat(phases, scene.rotor);

    // Per-pose simulators are reused across every epoch.
    std::vector<TraceSimulator> train_sims, val_sims;
    train_sims.reserve(poses.train.size());
    for (const Pose2& p : poses.train)
      train_sims.emplace_back(p, scene.geom, scene.rotor, scene.mics, scene.env, scene.clock);
    val_sims.reserve(poses.val.size());
    for (const Pose2& p : poses.val)
      val_sims.emplace_back(p, scene.geom, scene.rotor, scene.mics, scene.env, scene.clock);

    beta_opt_.init(phases.rotors(), phases.harmonics());
    const auto grid = penalty_time_grid(phases.period);

    TrainHistory history;
    const int phase_epochs = kNumRotors * cfg_.freezing_cycle_epochs + cfg_.joint_epochs;
    const bool phase_noise =
        cfg_.noise_training && cfg_.noise_training->kind == NoiseKind::phase;
    const bool sensor_noise =
        cfg_.noise_training && cfg_.noise_training->kind == NoiseKind::sensor;

    std::vector<int> order(poses.train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

    for (int epoch = 0; epoch < phase_epochs; ++epoch) {
      // -1: all rotors; otherwise the single unfrozen rotor of this cycle.
      const int active_rotor = epoch < kNumRotors * cfg_.freezing_cycle_epochs
                                   ? epoch / cfg_.freezing_cycle_epochs
                                   : -1;
      const double beta_lr = phase_lr_at(epoch);

      auto shuffle_rng = derive_stream(cfg_.seed, stream_tag(kTagShuffle, epoch));
      shuffle(order, shuffle_rng);

      double data_sum = 0.0, phys_sum = 0.0;
      int batch_count = 0;
      for (std::size_t start = 0; start < order.size(); start += cfg_.batch_size) {
        const std::size_t end = std::min(order.size(), start + cfg_.batch_size);
        const std::vector<int> batch(order.begin() + start, order.begin() + end);
        const int b = static_cast<int>(batch.size());
        const std::size_t batch_index = start / cfg_.batch_size;

        double snr = kSnrInfinite;
        if (phase_noise || sensor_noise) {
          auto rng = derive_stream(cfg_.seed, stream_tag(kTagBatchSnr, epoch, batch_index));
          snr = cfg_.noise_training->levels_db[bounded(rng, cfg_.noise_training->levels_db.size())];
        }

        const PhaseTrace enc = sample_encoder(phases, scene.clock);

        // Simulate the batch under the current phases.
        std::vector<TraceSimulator::Workspace> workspaces(b);
        std::vector<StftFeatures> audio_ft(b);
        std::vector<SampleFeat> batch_feats(b);
        std::vector<Eigen::MatrixXd> noise_mats(b);
        std::vector<int> local(b);
        for (int i = 0; i < b; ++i) {
          local[i] = i;
          const int item = batch[i];
          const Eigen::MatrixXd* noise_ptr = nullptr;
          PhaseTrace enc_i = enc;
          if (phase_noise) {
            auto rng = derive_stream(cfg_.seed,
                                     stream_tag(kTagSampleNoise, epoch * 8192 + batch_index, item));
            noise_mats[i] = phase_noise_matrix(enc.samples, scene.clock.f_e, snr, rng);
            enc_i.samples += noise_mats[i];
            noise_ptr = &noise_mats[i];
          }
          PressureTrace trace = train_sims[item].simulate_with_workspace(phases, workspaces[i], noise_ptr);
          if (sensor_noise) {
            auto rng = derive_stream(cfg_.seed,
                                     stream_tag(kTagSampleNoise, epoch * 8192 + batch_index, item));
            trace = inject_sensor_noise(trace, snr, rng);
          }
          audio_ft[i] = stft_features(trace.samples, model_.features);
          batch_feats[i].fa = flatten_rows(audio_ft[i].pooled_per_channel());
          batch_feats[i].fp =
              flatten_rows(stft_features(enc_i.samples, model_.features).pooled_per_channel());
          batch_feats[i].sin_az = std::sin(poses.train[item].azimuth);
          batch_feats[i].cos_az = std::cos(poses.train[item].azimuth);
        }

        Eigen::MatrixXd targets(2, b);
        for (int i = 0; i < b; ++i) {
          targets(0, i) = poses.train[batch[i]].position.x;
          targets(1, i) = poses.train[batch[i]].position.y;
        }

        const Eigen::MatrixXd x = assemble_inputs(model_, batch_feats, local);
        ForwardCache fc;
        forward_batch(model_, x, fc);
        ModelBlocks grads = model_.zero_grads();
        Eigen::MatrixXd dx;
        const double data_loss = backward_batch(model_, fc, targets, grads, dx);

        const PenaltyValue penalty = penalty_total(phases, ccfg, grid);
        if (!std::isfinite(data_loss) || !std::isfinite(penalty.total))
          throw NonFiniteLoss("train_joint: loss diverged (epoch " + std::to_string(epoch) + ")");

        // Data-term gradient with respect to the phase coefficients, through
        // the STFT features and the forward-model adjoint. The encoder-trace
        // input path is treated as a constant.
        Eigen::MatrixXd dbeta = penalty.gradient;
        const int d = model_.feat_dim();
        Eigen::MatrixXd dfa(model_.mics, d);
        for (int i = 0; i < b; ++i) {
          for (int mic = 0; mic < model_.mics; ++mic)
            dfa.row(mic) = dx.col(i).segment(mic * d, d);
          const Eigen::MatrixXd dtrace =
              stft_pooled_backward(audio_ft[i], model_.features, model_.audio_samples, dfa);
          train_sims[batch[i]].accumulate_phase_gradient(phases, workspaces[i], dtrace, dbeta);
        }

        opt_.step(model_.params, grads, cfg_.learning_rate);
        if (active_rotor >= 0) {
          beta_opt_.step_row(phases.beta, dbeta, active_rotor, beta_lr);
        } else {
          for (int r = 0; r < phases.rotors(); ++r) beta_opt_.step_row(phases.beta, dbeta, r, beta_lr);
        }

        data_sum += data_loss * b;
        phys_sum += penalty.total;
        ++batch_count;
      }

      const double phys_avg = batch_count > 0 ? phys_sum / batch_count : 0.0;
      EpochStats stats;
      stats.epoch = epoch;
      stats.train_data = data_sum / static_cast<double>(order.size());
      stats.train_phys = phys_avg;
      stats.train_total = stats.train_data + stats.train_phys;
      stats.val_loss = joint_val_loss(phases, poses, val_sims, scene);
      history.push_back(stats);
    }

    // Final stage: phases frozen, estimator training continues on traces
    // simulated once under the learned phases.
    std::vector<Measurement> frozen_items;
    std::vector<SampleFeat> feats;
    std::vector<Vec2> labels;
    std::vector<const Measurement*> raw;
    std::vector<int> train_idx, val_idx;
    const PhaseTrace enc = sample_encoder(phases, scene.clock);
    for (std::size_t i = 0; i < poses.train.size(); ++i) {
      Measurement m{poses.train[i], train_sims[i].simulate(phases), enc};
      frozen_items.push_back(std::move(m));
      train_idx.push_back(static_cast<int>(i));
    }
    for (std::size_t i = 0; i < poses.val.size(); ++i) {
      Measurement m{poses.val[i], val_sims[i].simulate(phases), enc};
      frozen_items.push_back(std::move(m));
      val_idx.push_back(static_cast<int>(poses.train.size() + i));
    }
    feats.reserve(frozen_items.size());
    for (const auto& m : frozen_items) {
      feats.push_back(extract_features(model_, m.mics, m.phases, m.pose.azimuth));
      labels.push_back(m.pose.position);
      raw.push_back(&m);
    }
    const double phys_frozen = penalty_total(phases, ccfg, grid).total;
    static_epochs(phase_epochs, cfg_.final_frozen_epochs, feats, raw, labels, train_idx, val_idx,
                  phys_frozen, history);

    return {best_or_final(), std::move(phases), std::move(history)};
  }

 private:
  /// Shared estimator-only epoch loop over fixed traces; used directly by
  /// train_localizer and by the frozen stage of joint training.
  void static_epochs(int first_epoch, int n_epochs, const std::vector<SampleFeat>& clean_feats,
                     const std::vector<const Measurement*>& raw, const std::vector<Vec2>& labels,
                     const std::vector<int>& train_idx, const std::vector<int>& val_idx,
                     double phys_constant, TrainHistory& history) {
    const bool sensor_noise =
        cfg_.noise_training && cfg_.noise_training->kind == NoiseKind::sensor;

    std::vector<int> order = train_idx;
    for (int e = 0; e < n_epochs; ++e) {
      const int epoch = first_epoch + e;
      auto shuffle_rng = derive_stream(cfg_.seed, stream_tag(kTagShuffle, epoch));
      order = train_idx;
      shuffle(order, shuffle_rng);

      double data_sum = 0.0;
      for (std::size_t start = 0; start < order.size(); start += cfg_.batch_size) {
        const std::size_t end = std::min(order.size(), start + cfg_.batch_size);
        const std::vector<int> batch(order.begin() + start, order.begin() + end);
        const std::size_t batch_index = start / cfg_.batch_size;
        const int b = static_cast<int>(batch.size());

        std::vector<SampleFeat> noisy_feats;
        const std::vector<SampleFeat>* feats = &clean_feats;
        std::vector<int> select = batch;
        if (sensor_noise) {
          auto snr_rng = derive_stream(cfg_.seed, stream_tag(kTagBatchSnr, epoch, batch_index));
          const double snr =
              cfg_.noise_training->levels_db[bounded(snr_rng, cfg_.noise_training->levels_db.size())];
          noisy_feats.resize(b);
          for (int i = 0; i < b; ++i) {
            const Measurement& m = *raw[batch[i]];
            auto rng = derive_stream(cfg_.seed,
                                     stream_tag(kTagSampleNoise, epoch * 8192 + batch_index, batch[i]));
            const PressureTrace noisy = inject_sensor_noise(m.mics, snr, rng);
            noisy_feats[i].fa =
                flatten_rows(stft_features(noisy.samples, model_.features).pooled_per_channel());
            noisy_feats[i].fp = clean_feats[batch[i]].fp;
            noisy_feats[i].sin_az = clean_feats[batch[i]].sin_az;
            noisy_feats[i].cos_az = clean_feats[batch[i]].cos_az;
            select[i] = i;
          }
          feats = &noisy_feats;
        }

        Eigen::MatrixXd targets(2, b);
        for (int i = 0; i < b; ++i) {
          targets(0, i) = labels[batch[i]].x;
          targets(1, i) = labels[batch[i]].y;
        }
        const Eigen::MatrixXd x = assemble_inputs(model_, *feats, select);
        ForwardCache fc;
        forward_batch(model_, x, fc);
        ModelBlocks grads = model_.zero_grads();
        Eigen::MatrixXd dx;
        const double loss = backward_batch(model_, fc, targets, grads, dx);
        if (!std::isfinite(loss))
          throw NonFiniteLoss("training: loss diverged (epoch " + std::to_string(epoch) + ")");
        opt_.step(model_.params, grads, cfg_.learning_rate);
        data_sum += loss * b;
      }

      EpochStats stats;
      stats.epoch = epoch;
      stats.train_data = order.empty() ? 0.0 : data_sum / static_cast<double>(order.size());
      stats.train_phys = phys_constant;
      stats.train_total = stats.train_data + stats.train_phys;
      stats.val_loss = static_val_loss(clean_feats, labels, val_idx);
      history.push_back(stats);
      maybe_keep_best(stats.val_loss, !val_idx.empty());
    }
  }

  double static_val_loss(const std::vector<SampleFeat>& feats, const std::vector<Vec2>& labels,
                         const std::vector<int>& val_idx) {
    if (val_idx.empty()) return 0.0;
    const Eigen::MatrixXd x = assemble_inputs(model_, feats, val_idx);
    ForwardCache fc;
    forward_batch(model_, x, fc);
    double sum = 0.0;
    for (std::size_t i = 0; i < val_idx.size(); ++i) {
      const double ex = fc.out(0, i) - labels[val_idx[i]].x;
      const double ey = fc.out(1, i) - labels[val_idx[i]].y;
      sum += ex * ex + ey * ey;
    }
    return sum / static_cast<double>(val_idx.size());
  }

  double joint_val_loss(const PhaseParams& phases, const SplitPoses& poses,
                        std::vector<TraceSimulator>& val_sims, const Scene& scene) {
    if (val_sims.empty()) return 0.0;
    const PhaseTrace enc = sample_encoder(phases, scene.clock);
    std::vector<SampleFeat> feats(val_sims.size());
    std::vector<int> idx(val_sims.size());
    for (std::size_t i = 0; i < val_sims.size(); ++i) {
      const PressureTrace trace = val_sims[i].simulate(phases);
      feats[i].fa = flatten_rows(stft_features(trace.samples, model_.features).pooled_per_channel());
      feats[i].fp = flatten_rows(stft_features(enc.samples, model_.features).pooled_per_channel());
      feats[i].sin_az = std::sin(poses.val[i].azimuth);
      feats[i].cos_az = std::cos(poses.val[i].azimuth);
      idx[i] = static_cast<int>(i);
    }
    const Eigen::MatrixXd x = assemble_inputs(model_, feats, idx);
    ForwardCache fc;
    forward_batch(model_, x, fc);
    double sum = 0.0;
    for (std::size_t i = 0; i < val_sims.size(); ++i) {
      const double ex = fc.out(0, i) - poses.val[i].position.x;
      const double ey = fc.out(1, i) - poses.val[i].position.y;
      sum += ex * ex + ey * ey;
    }
    return sum / static_cast<double>(val_sims.size());
  }

  double phase_lr_at(int epoch) const {
    const int fine_tune_start = kNumRotors * cfg_.freezing_cycle_epochs;
    if (epoch < fine_tune_start || cfg_.phase_lr_decay_epochs < 1) return cfg_.phase_learning_rate;
    const int steps = (epoch - fine_tune_start) / cfg_.phase_lr_decay_epochs;
    return cfg_.phase_learning_rate * std::pow(cfg_.phase_lr_decay, steps);
  }

  void maybe_keep_best(double val_loss, bool has_val) {
    if (!has_val) return;
    if (!best_ || val_loss < best_val_) {
      best_ = model_;
      best_val_ = val_loss;
    }
  }

  LocalizerModel best_or_final() const { return best_ ? *best_ : model_; }

  LocalizerModel model_;
  TrainConfig cfg_;
  AdamState opt_;
  RowAdam beta_opt_;
  std::optional<LocalizerModel> best_;
  double best_val_ = 0.0;
};

}  // namespace detail

/// Minimizes the mean squared localization error over the training split by
/// mini-batch Adam; returns the best-validation model and the loss history.
inline TrainResult train_localizer(const MeasurementSet& data, const LocalizerModel& init,
                                   const TrainConfig& cfg) {
  detail::Trainer trainer(init, cfg);
  return trainer.run_static(data);
}

/// Joint phase-modulation and estimator training with the freezing schedule.
/// The estimator parameters are updated at every step; phase coefficients
/// follow the per-rotor cycles, joint fine-tuning, then stay frozen.
inline JointResult train_joint(const Scene& scene, const SplitPoses& poses,
                               const PhaseParams& phases_init, const LocalizerModel& init,
                               const TrainConfig& cfg, const ConstraintConfig& ccfg) {
  detail::Trainer trainer(init, cfg);
  return trainer.run_joint(scene, poses, phases_init, ccfg);
}

/// Grid-search baseline: simulates a candidate trace at every grid point
/// (same azimuth and phases) and returns the point with the highest
/// normalized cross-correlation against the observed trace. Ties break to
/// the lowest index.
inline Vec2 matched_field_localize(const PressureTrace& p, const PhaseParams& phi_used,
                                   double azimuth, const Scene& scene,
                                   const std::vector<Vec2>& grid) {
  if (grid.empty()) throw ConfigError("matched_field_localize: empty grid");
  const double p_norm = p.samples.norm();
  double best = -2.0;
  std::size_t best_idx = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const PressureTrace cand = simulate_mics(scene, Pose2(azimuth, grid[i]), phi_used);
    if (cand.samples.rows() != p.samples.rows() || cand.samples.cols() != p.samples.cols())
      throw ShapeMismatch("matched_field_localize: candidate and observed trace shapes differ");
    const double denom = p_norm * cand.samples.norm();
    const double ncc =
        denom > 0.0 ? p.samples.cwiseProduct(cand.samples).sum() / denom : 0.0;
    if (ncc > best) {
      best = ncc;
      best_idx = i;
    }
  }
  return grid[best_idx];
}

}  // namespace mavloc
