// SPDX-License-Identifier: Apache-2.0
//
// File formats.
//   - JSON for configuration-like data (scenes, rotor models, phase
//     parameters, train/constraint configs). Unknown keys are rejected.
//   - Binary little-endian containers for bulk data: "MAVT" traces,
//     "MAVM" model checkpoints, "MAVD" datasets. All payloads are raw f64,
//     so identical inputs produce byte-identical files.

#pragma once

#include <bit>
#include <cstring>
#include <fstream>
#include <json.hpp>

#include "mavloc/localizer.hpp"

namespace mavloc {

static_assert(std::endian::native == std::endian::little, "binary formats assume little-endian");

using nlohmann::json;

// ---------------------------------------------------------------------------
// JSON helpers.

namespace detail {

inline void require_keys(const json& j, const char* what, std::initializer_list<const char*> required,
                         std::initializer_list<const char*> optional = {}) {
  if (!j.is_object()) throw ConfigError(std::string(what) + ": expected a JSON object");
  for (const char* key : required)
    if (!j.contains(key)) throw ConfigError(std::string(what) + ": missing key '" + key + "'");
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (const char* k : required) known = known || key == k;
    for (const char* k : optional) known = known || key == k;
    if (!known) throw ConfigError(std::string(what) + ": unknown key '" + key + "'");
  }
}

inline Vec2 vec2_from_json(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 2) throw ConfigError(std::string(what) + ": expected [x, y]");
  return {j[0].get<double>(), j[1].get<double>()};
}

}  // namespace detail

inline json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": invalid JSON (" + e.what() + ")");
  }
  return j;
}

inline void save_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << j.dump(2) << "\n";
  if (!out) throw IoError("write failed: " + path);
}

// ---------------------------------------------------------------------------
// Rotor model JSON.

inline json to_json(const RotorSourceModel& m) {
  json sources = json::array();
  for (const auto& s : m.sources) {
    json harmonics = json::array();
    for (const auto& h : s.harmonics)
      harmonics.push_back({{"k", h.k}, {"alpha", h.amplitude}, {"psi", h.phase}});
    sources.push_back({{"xi", {s.position.x, s.position.y}}, {"harmonics", harmonics}});
  }
  json j{{"omega_rad_s", m.omega}, {"sources", sources}};
  if (m.legacy_delay) j["legacy_delay"] = true;
  return j;
}

inline RotorSourceModel rotor_from_json(const json& j) {
  detail::require_keys(j, "rotor model", {"omega_rad_s", "sources"}, {"legacy_delay"});
  RotorSourceModel m;
  m.omega = j["omega_rad_s"].get<double>();
  m.legacy_delay = j.value("legacy_delay", false);
  for (const json& js : j["sources"]) {
    detail::require_keys(js, "rotor source", {"xi", "harmonics"});
    PointSource s;
    s.position = detail::vec2_from_json(js["xi"], "rotor source xi");
    for (const json& jh : js["harmonics"]) {
      detail::require_keys(jh, "harmonic", {"k", "alpha", "psi"});
      s.harmonics.push_back({jh["k"].get<double>(), jh["alpha"].get<double>(), jh["psi"].get<double>()});
    }
    m.sources.push_back(std::move(s));
  }
  validate(m);
  return m;
}

// ---------------------------------------------------------------------------
// Environment JSON.

inline json to_json(const Environment& e) {
  json verts = json::array();
  for (const Vec2& v : e.vertices) verts.push_back({v.x, v.y});
  return {{"vertices", verts}, {"gamma", e.gamma}, {"max_order", e.max_order}};
}

inline Environment environment_from_json(const json& j) {
  detail::require_keys(j, "environment", {"vertices", "gamma", "max_order"});
  if (!j["vertices"].is_array() || j["vertices"].size() != 4)
    throw ConfigError("environment: expected exactly 4 vertices");
  std::array<Vec2, 4> verts;
  for (int i = 0; i < 4; ++i) verts[i] = detail::vec2_from_json(j["vertices"][i], "environment vertex");
  return Environment(verts, j["gamma"].get<double>(), j["max_order"].get<int>());
}

// ---------------------------------------------------------------------------
// Phase parameters JSON.

inline json to_json(const PhaseParams& p) {
  json beta = json::array();
  for (int r = 0; r < p.rotors(); ++r) {
    json row = json::array();
    for (int k = 0; k < p.harmonics(); ++k) row.push_back(p.beta(r, k));
    beta.push_back(row);
  }
  return {{"omega_rad_s", p.omega}, {"period_s", p.period}, {"beta", beta}};
}

inline PhaseParams phases_from_json(const json& j) {
  detail::require_keys(j, "phase parameters", {"omega_rad_s", "period_s", "beta"});
  PhaseParams p;
  p.omega = j["omega_rad_s"].get<double>();
  p.period = j["period_s"].get<double>();
  const json& beta = j["beta"];
  if (!beta.is_array() || beta.empty()) throw ConfigError("phase parameters: beta must be a non-empty array");
  const int rotors = static_cast<int>(beta.size());
  const int harmonics = static_cast<int>(beta[0].size());
  if (harmonics < 1) throw ConfigError("phase parameters: need at least one harmonic");
  p.beta.resize(rotors, harmonics);
  for (int r = 0; r < rotors; ++r) {
    if (static_cast<int>(beta[r].size()) != harmonics)
      throw ConfigError("phase parameters: ragged beta rows");
    for (int k = 0; k < harmonics; ++k) p.beta(r, k) = beta[r][k].get<double>();
  }
  if (!(p.omega > 0.0) || !(p.period > 0.0)) throw ConfigError("phase parameters: omega and period must be positive");
  return p;
}

// ---------------------------------------------------------------------------
// Constraint / train configs.

inline json to_json(const ConstraintConfig& c) {
  return {{"omega_max", c.omega_max},
          {"alpha_max", c.alpha_max},
          {"lambda_omega", c.lambda_omega},
          {"lambda_alpha", c.lambda_alpha},
          {"lambda_thrust", c.lambda_thrust},
          {"kernel_sigmas", c.kernel_sigmas},
          {"paper_literal_derivatives", c.paper_literal_derivatives}};
}

inline ConstraintConfig constraints_from_json(const json& j) {
  detail::require_keys(j, "constraints", {},
                       {"omega_max", "alpha_max", "lambda_omega", "lambda_alpha", "lambda_thrust",
                        "kernel_sigmas", "paper_literal_derivatives"});
  ConstraintConfig c;
  c.omega_max = j.value("omega_max", c.omega_max);
  c.alpha_max = j.value("alpha_max", c.alpha_max);
  c.lambda_omega = j.value("lambda_omega", c.lambda_omega);
  c.lambda_alpha = j.value("lambda_alpha", c.lambda_alpha);
  c.lambda_thrust = j.value("lambda_thrust", c.lambda_thrust);
  if (j.contains("kernel_sigmas")) c.kernel_sigmas = j["kernel_sigmas"].get<std::vector<double>>();
  c.paper_literal_derivatives = j.value("paper_literal_derivatives", false);
  c.validate();
  return c;
}

inline json to_json(const TrainConfig& c) {
  json j{{"epochs", c.epochs},
         {"batch_size", c.batch_size},
         {"learning_rate", c.learning_rate},
         {"seed", c.seed},
         {"freezing_cycle_epochs", c.freezing_cycle_epochs},
         {"joint_epochs", c.joint_epochs},
         {"final_frozen_epochs", c.final_frozen_epochs},
         {"phase_learning_rate", c.phase_learning_rate},
         {"phase_lr_decay", c.phase_lr_decay},
         {"phase_lr_decay_epochs", c.phase_lr_decay_epochs}};
  if (c.noise_training) {
    j["noise_training"] = {{"kind", c.noise_training->kind == NoiseKind::sensor ? "sensor" : "phase"},
                           {"levels_db", c.noise_training->levels_db}};
  }
  return j;
}

inline TrainConfig train_config_from_json(const json& j) {
  detail::require_keys(j, "train config", {},
                       {"epochs", "batch_size", "learning_rate", "seed", "freezing_cycle_epochs",
                        "joint_epochs", "final_frozen_epochs", "phase_learning_rate",
                        "phase_lr_decay", "phase_lr_decay_epochs", "noise_training"});
  TrainConfig c;
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.seed = j.value("seed", c.seed);
  c.freezing_cycle_epochs = j.value("freezing_cycle_epochs", c.freezing_cycle_epochs);
  c.joint_epochs = j.value("joint_epochs", c.joint_epochs);
  c.final_frozen_epochs = j.value("final_frozen_epochs", c.final_frozen_epochs);
  c.phase_learning_rate = j.value("phase_learning_rate", c.phase_learning_rate);
  c.phase_lr_decay = j.value("phase_lr_decay", c.phase_lr_decay);
  c.phase_lr_decay_epochs = j.value("phase_lr_decay_epochs", c.phase_lr_decay_epochs);
  if (j.contains("noise_training")) {
    detail::require_keys(j["noise_training"], "noise_training", {"kind", "levels_db"});
    NoiseSchedule s;
    const std::string kind = j["noise_training"]["kind"].get<std::string>();
    if (kind == "sensor")
      s.kind = NoiseKind::sensor;
    else if (kind == "phase")
      s.kind = NoiseKind::phase;
    else
      throw ConfigError("noise_training: kind must be 'sensor' or 'phase'");
    s.levels_db = j["noise_training"]["levels_db"].get<std::vector<double>>();
    if (s.levels_db.empty()) throw ConfigError("noise_training: levels_db must be non-empty");
    c.noise_training = std::move(s);
  }
  return c;
}

// ---------------------------------------------------------------------------
// Scene JSON.

inline json to_json(const Scene& s) {
  json geometry;
  {
    json poses = json::array();
    for (const Pose2& p : s.geom.rotor_transforms)
      poses.push_back({p.azimuth, p.position.x, p.position.y});
    geometry = {{"rotor_poses", poses},
                {"spin", std::vector<int>(s.geom.spin.begin(), s.geom.spin.end())},
                {"mirror_counter_rotating", s.geom.mirror_counter_rotating}};
  }
  json mics = json::array();
  for (const Vec2& m : s.mics.positions) mics.push_back({m.x, m.y});
  return {{"environment", to_json(s.env)},
          {"rotor_model", to_json(s.rotor)},
          {"geometry", geometry},
          {"mics", {{"positions", mics}}},
          {"clock",
           {{"f_s", s.clock.f_s}, {"f_e", s.clock.f_e}, {"n_samples", s.clock.n_samples}, {"c", s.clock.c}}}};
}

inline Scene scene_from_json(const json& j) {
  detail::require_keys(j, "scene", {"environment"},
                       {"omega_rps", "rotor_model", "geometry", "mics", "clock"});
  const double omega_rps = j.value("omega_rps", kDefaultOmegaRps);
  const DefaultSetup d = default_setup();

  Scene s;
  s.env = environment_from_json(j["environment"]);

  if (!j.contains("rotor_model") || j["rotor_model"] == "default")
    s.rotor = default_rotor_model(kTwoPi * omega_rps);
  else
    s.rotor = rotor_from_json(j["rotor_model"]);

  if (!j.contains("geometry") || j["geometry"] == "default") {
    s.geom = d.geom;
  } else {
    const json& jg = j["geometry"];
    detail::require_keys(jg, "geometry", {"rotor_poses", "spin"}, {"mirror_counter_rotating"});
    if (jg["rotor_poses"].size() != 4 || jg["spin"].size() != 4)
      throw ConfigError("geometry: expected exactly four rotors");
    for (int r = 0; r < 4; ++r) {
      const json& jp = jg["rotor_poses"][r];
      if (!jp.is_array() || jp.size() != 3) throw ConfigError("geometry: rotor pose must be [azimuth, x, y]");
      s.geom.rotor_transforms[r] =
          Pose2(jp[0].get<double>(), {jp[1].get<double>(), jp[2].get<double>()});
      s.geom.spin[r] = jg["spin"][r].get<int>();
    }
    s.geom.mirror_counter_rotating = jg.value("mirror_counter_rotating", true);
    s.geom.validate();
  }

  if (!j.contains("mics") || j["mics"] == "default") {
    s.mics = d.mics;
  } else {
    detail::require_keys(j["mics"], "mics", {"positions"});
    for (const json& jm : j["mics"]["positions"])
      s.mics.positions.push_back(detail::vec2_from_json(jm, "mic position"));
    s.mics.validate();
  }

  if (!j.contains("clock") || j["clock"] == "default") {
    s.clock = SampleClock(1025.0 * omega_rps / 8.0, 128.0 * omega_rps, 1025, kDefaultSpeedOfSound);
  } else {
    const json& jc = j["clock"];
    detail::require_keys(jc, "clock", {"f_s", "f_e", "n_samples"}, {"c"});
    s.clock = SampleClock(jc["f_s"].get<double>(), jc["f_e"].get<double>(), jc["n_samples"].get<int>(),
                          jc.value("c", kDefaultSpeedOfSound));
  }
  return s;
}

// ---------------------------------------------------------------------------
// Binary primitives.

namespace detail {

struct BinWriter {
  std::ofstream out;

  explicit BinWriter(const std::string& path) : out(path, std::ios::binary) {
    if (!out) throw IoError("cannot write " + path);
  }
  void magic(const char m[5]) { out.write(m, 4); }
  void u32(std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }
  void u64(std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); }
  void f64(double v) { out.write(reinterpret_cast<const char*>(&v), 8); }
  void matrix(const Eigen::MatrixXd& m) {  // row-major stream
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) f64(m(i, j));
  }
  void done(const std::string& path) {
    out.flush();
    if (!out) throw IoError("write failed: " + path);
  }
};

struct BinReader {
  std::ifstream in;
  std::string path;

  explicit BinReader(const std::string& p) : in(p, std::ios::binary), path(p) {
    if (!in) throw IoError("cannot open " + p);
  }
  void magic(const char m[5]) {
    char buf[4];
    in.read(buf, 4);
    if (!in || std::memcmp(buf, m, 4) != 0) throw IoError(path + ": bad magic (expected " + m + ")");
  }
  std::uint32_t u32() {
    std::uint32_t v;
    in.read(reinterpret_cast<char*>(&v), 4);
    if (!in) throw IoError(path + ": truncated file");
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v;
    in.read(reinterpret_cast<char*>(&v), 8);
    if (!in) throw IoError(path + ": truncated file");
    return v;
  }
  double f64() {
    double v;
    in.read(reinterpret_cast<char*>(&v), 8);
    if (!in) throw IoError(path + ": truncated file");
    return v;
  }
  Eigen::MatrixXd matrix(int rows, int cols) {
    Eigen::MatrixXd m(rows, cols);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) m(i, j) = f64();
    return m;
  }
};

}  // namespace detail

// ---------------------------------------------------------------------------
// MAVT trace files.

inline void write_trace_file(const std::string& path, const Measurement& m) {
  detail::BinWriter w(path);
  w.magic("MAVT");
  w.u32(1);
  w.u32(static_cast<std::uint32_t>(m.mics.samples.rows()));
  w.u32(static_cast<std::uint32_t>(m.phases.samples.rows()));
  w.u32(static_cast<std::uint32_t>(m.mics.samples.cols()));
  w.u32(static_cast<std::uint32_t>(m.phases.samples.cols()));
  w.f64(m.mics.clock.f_s);
  w.f64(m.mics.clock.f_e);
  w.f64(m.pose.azimuth);
  w.f64(m.pose.position.x);
  w.f64(m.pose.position.y);
  w.matrix(m.mics.samples);
  w.matrix(m.phases.samples);
  w.done(path);
}

inline Measurement read_trace_file(const std::string& path) {
  detail::BinReader r(path);
  r.magic("MAVT");
  const std::uint32_t version = r.u32();
  if (version != 1) throw IoError(path + ": unsupported MAVT version");
  const int mics = static_cast<int>(r.u32());
  const int rotors = static_cast<int>(r.u32());
  const int n = static_cast<int>(r.u32());
  const int n_e = static_cast<int>(r.u32());
  const double f_s = r.f64();
  const double f_e = r.f64();
  Measurement m;
  const double az = r.f64();
  const double tx = r.f64();
  const double ty = r.f64();
  m.pose = Pose2(az, {tx, ty});
  const SampleClock clock(f_s, f_e, n);
  m.mics.clock = clock;
  m.phases.clock = clock;
  m.mics.samples = r.matrix(mics, n);
  m.phases.samples = r.matrix(rotors, n_e);
  return m;
}

// ---------------------------------------------------------------------------
// MAVM model checkpoints (+ JSON sidecar for config and history).

inline void write_model_file(const std::string& path, const LocalizerModel& m) {
  detail::BinWriter w(path);
  w.magic("MAVM");
  w.u32(1);
  w.u32(static_cast<std::uint32_t>(m.features.window));
  w.u32(static_cast<std::uint32_t>(m.features.hop));
  w.u32(m.features.taper == Taper::hann ? 0u : 1u);
  w.u32(static_cast<std::uint32_t>(m.features.frame_stride));
  w.u32(m.features.magnitude_gated_phase ? 1u : 0u);
  w.u32(static_cast<std::uint32_t>(m.mics));
  w.u32(static_cast<std::uint32_t>(m.rotors));
  w.u32(static_cast<std::uint32_t>(m.audio_samples));
  w.u32(static_cast<std::uint32_t>(m.encoder_samples));
  w.u32(static_cast<std::uint32_t>(m.audio_frames));
  w.u32(static_cast<std::uint32_t>(m.phase_frames));
  w.u32(static_cast<std::uint32_t>(m.hidden));
  for_each_block(m.params, [&](const auto& blk) { w.matrix(blk); });
  w.done(path);
}

inline LocalizerModel read_model_file(const std::string& path) {
  detail::BinReader r(path);
  r.magic("MAVM");
  if (r.u32() != 1) throw IoError(path + ": unsupported MAVM version");
  LocalizerModel m;
  m.features.window = static_cast<int>(r.u32());
  m.features.hop = static_cast<int>(r.u32());
  m.features.taper = r.u32() == 0 ? Taper::hann : Taper::rect;
  m.features.frame_stride = static_cast<int>(r.u32());
  m.features.magnitude_gated_phase = r.u32() != 0;
  m.mics = static_cast<int>(r.u32());
  m.rotors = static_cast<int>(r.u32());
  m.audio_samples = static_cast<int>(r.u32());
  m.encoder_samples = static_cast<int>(r.u32());
  m.audio_frames = static_cast<int>(r.u32());
  m.phase_frames = static_cast<int>(r.u32());
  m.hidden = static_cast<int>(r.u32());

  const int d = m.feat_dim();
  m.params.emb_time = r.matrix(d, m.emb_frames());
  m.params.emb_mic = r.matrix(d, m.mics);
  m.params.emb_rotor = r.matrix(d, m.rotors);
  m.params.w1 = r.matrix(m.hidden, m.input_dim());
  m.params.b1 = r.matrix(m.hidden, 1);
  m.params.w2 = r.matrix(m.hidden, m.hidden);
  m.params.b2 = r.matrix(m.hidden, 1);
  m.params.w3 = r.matrix(2, m.hidden);
  m.params.b3 = r.matrix(2, 1);
  return m;
}

inline void save_history_json(const std::string& path, const TrainConfig& cfg,
                              const TrainHistory& history) {
  json rows = json::array();
  for (const EpochStats& s : history)
    rows.push_back({{"epoch", s.epoch},
                    {"train_data", s.train_data},
                    {"train_phys", s.train_phys},
                    {"train_total", s.train_total},
                    {"val_loss", s.val_loss}});
  save_json_file(path, json{{"train_config", to_json(cfg)}, {"history", rows}});
}

// ---------------------------------------------------------------------------
// Dataset specification and MAVD dataset files.

struct DatasetSpec {
  int grid_points_per_side = 9;
  int orientations = 8;
  double margin = 0.93;  // [m]
  std::uint64_t seed = 0;

  void validate() const {
    if (grid_points_per_side < 1 || orientations < 1)
      throw ConfigError("DatasetSpec: counts must be positive");
    if (margin < 0.0) throw ConfigError("DatasetSpec: margin must be non-negative");
  }
};

inline json to_json(const DatasetSpec& s) {
  return {{"grid_points_per_side", s.grid_points_per_side},
          {"orientations", s.orientations},
          {"margin", s.margin},
          {"seed", s.seed}};
}

inline DatasetSpec dataset_spec_from_json(const json& j) {
  detail::require_keys(j, "dataset spec", {},
                       {"grid_points_per_side", "orientations", "margin", "seed"});
  DatasetSpec s;
  s.grid_points_per_side = j.value("grid_points_per_side", s.grid_points_per_side);
  s.orientations = j.value("orientations", s.orientations);
  s.margin = j.value("margin", s.margin);
  s.seed = j.value("seed", s.seed);
  s.validate();
  return s;
}

struct Dataset {
  double omega = 0.0;  // shaft rate the traces were generated with
  DatasetSpec spec;
  SampleClock clock;
  MeasurementSet data;
};

inline void write_dataset_file(const std::string& path, const Dataset& d) {
  detail::BinWriter w(path);
  w.magic("MAVD");
  w.u32(1);
  w.u32(static_cast<std::uint32_t>(d.data.items.size()));
  const int mics = d.data.items.empty() ? 0 : d.data.items[0].mics.mics();
  const int rotors = d.data.items.empty() ? 0 : d.data.items[0].phases.rotors();
  const int n_e = d.data.items.empty() ? 0 : d.data.items[0].phases.length();
  w.u32(static_cast<std::uint32_t>(mics));
  w.u32(static_cast<std::uint32_t>(d.clock.n_samples));
  w.u32(static_cast<std::uint32_t>(rotors));
  w.u32(static_cast<std::uint32_t>(n_e));
  w.f64(d.clock.f_s);
  w.f64(d.clock.f_e);
  w.f64(d.clock.c);
  w.f64(d.omega);
  w.u32(static_cast<std::uint32_t>(d.spec.grid_points_per_side));
  w.u32(static_cast<std::uint32_t>(d.spec.orientations));
  w.f64(d.spec.margin);
  w.u64(d.spec.seed);
  for (const Measurement& m : d.data.items) {
    w.f64(m.pose.azimuth);
    w.f64(m.pose.position.x);
    w.f64(m.pose.position.y);
    w.matrix(m.mics.samples);
    w.matrix(m.phases.samples);
  }
  auto write_split = [&](const std::vector<int>& idx) {
    w.u32(static_cast<std::uint32_t>(idx.size()));
    for (int i : idx) w.u32(static_cast<std::uint32_t>(i));
  };
  write_split(d.data.train);
  write_split(d.data.val);
  write_split(d.data.test);
  w.done(path);
}

inline Dataset read_dataset_file(const std::string& path) {
  detail::BinReader r(path);
  r.magic("MAVD");
  if (r.u32() != 1) throw IoError(path + ": unsupported MAVD version");
  const int count = static_cast<int>(r.u32());
  const int mics = static_cast<int>(r.u32());
  const int n = static_cast<int>(r.u32());
  const int rotors = static_cast<int>(r.u32());
  const int n_e = static_cast<int>(r.u32());
  const double f_s = r.f64();
  const double f_e = r.f64();
  const double c = r.f64();

  Dataset d;
  d.omega = r.f64();
  d.spec.grid_points_per_side = static_cast<int>(r.u32());
  d.spec.orientations = static_cast<int>(r.u32());
  d.spec.margin = r.f64();
  d.spec.seed = r.u64();
  d.clock = SampleClock(f_s, f_e, n, c);
  d.data.items.reserve(count);
  for (int i = 0; i < count; ++i) {
    Measurement m;
    const double az = r.f64();
    const double tx = r.f64();
    const double ty = r.f64();
    m.pose = Pose2(az, {tx, ty});
    m.mics.clock = d.clock;
    m.phases.clock = d.clock;
    m.mics.samples = r.matrix(mics, n);
    m.phases.samples = r.matrix(rotors, n_e);
    d.data.items.push_back(std::move(m));
  }
  auto read_split = [&](std::vector<int>& idx) {
    const int k = static_cast<int>(r.u32());
    idx.resize(k);
    for (int i = 0; i < k; ++i) idx[i] = static_cast<int>(r.u32());
  };
  read_split(d.data.train);
  read_split(d.data.val);
  read_split(d.data.test);
  return d;
}

}  // namespace mavloc
