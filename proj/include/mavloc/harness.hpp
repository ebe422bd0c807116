// SPDX-License-Identifier: Apache-2.0
//
// Experiment orchestration: dataset generation over a pose grid, RMS
// evaluation (per-measurement and aggregated), and the robustness sweeps
// where a model trained on the nominal scene is evaluated against perturbed
// environments or injected noise. All randomness flows from explicit seeds
// through per-record derived streams, so reports are byte-reproducible.

#pragma once

#include <iomanip>
#include <sstream>

#include "mavloc/aggregate.hpp"
#include "mavloc/io.hpp"

namespace mavloc {

namespace detail {
inline constexpr std::uint64_t kTagSplit = 11;
inline constexpr std::uint64_t kTagEvalNoise = 13;
}  // namespace detail

/// Uniform grid over the viable region (bilinear in the quad's corners; an
/// exact uniform grid for rectangular rooms). A single point sits at the
/// patch center.
inline std::vector<Vec2> dataset_grid_positions(const Environment& env, const DatasetSpec& spec) {
  spec.validate();
  const Environment region = viable_region(env, spec.margin);
  const int g = spec.grid_points_per_side;
  const auto& v = region.vertices;
  std::vector<Vec2> out;
  out.reserve(static_cast<std::size_t>(g) * g);
  for (int iy = 0; iy < g; ++iy)
    for (int ix = 0; ix < g; ++ix) {
      const double s = g == 1 ? 0.5 : static_cast<double>(ix) / (g - 1);
      const double t = g == 1 ? 0.5 : static_cast<double>(iy) / (g - 1);
      out.push_back(v[0] * ((1 - s) * (1 - t)) + v[1] * (s * (1 - t)) + v[2] * (s * t) +
                    v[3] * ((1 - s) * t));
    }
  return out;
}

inline std::vector<double> dataset_orientations(const DatasetSpec& spec) {
  std::vector<double> out(spec.orientations);
  for (int j = 0; j < spec.orientations; ++j) out[j] = wrap_angle(kTwoPi * j / spec.orientations);
  return out;
}

/// One record per (grid position, orientation), position-major, with an
/// 80/10/10 split drawn from the spec seed.
inline Dataset make_dataset(const Scene& scene, const PhaseParams& phases, const DatasetSpec& spec) {
  spec.validate();
  detail::check_phase_compat(phases, scene.rotor);
  const std::vector<Vec2> positions = dataset_grid_positions(scene.env, spec);
  const std::vector<double> orientations = dataset_orientations(spec);
  const PhaseTrace enc = sample_encoder(phases, scene.clock);

  Dataset d;
  d.omega = phases.omega;
  d.spec = spec;
  d.clock = scene.clock;
  d.data.items.reserve(positions.size() * orientations.size());
  for (const Vec2& pos : positions)
    for (double az : orientations) {
      const Pose2 pose(az, pos);
      d.data.items.push_back({pose, simulate_mics(scene, pose, phases), enc});
    }

  const int n = static_cast<int>(d.data.items.size());
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  auto rng = derive_stream(spec.seed, detail::stream_tag(detail::kTagSplit, 0));
  shuffle(order, rng);
  const int n_train = n * 8 / 10;
  const int n_val = n * 9 / 10 - n_train;
  d.data.train.assign(order.begin(), order.begin() + n_train);
  d.data.val.assign(order.begin() + n_train, order.begin() + n_train + n_val);
  d.data.test.assign(order.begin() + n_train + n_val, order.end());
  return d;
}

inline SplitPoses split_poses(const Dataset& d) {
  SplitPoses out;
  for (int i : d.data.train) out.train.push_back(d.data.items[i].pose);
  for (int i : d.data.val) out.val.push_back(d.data.items[i].pose);
  for (int i : d.data.test) out.test.push_back(d.data.items[i].pose);
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation.

struct EvalSummary {
  double rms = 0.0;
  double sigma = 0.0;  // 1-sigma spread of the per-record errors
  int count = 0;
};

inline EvalSummary summarize_errors(const std::vector<double>& errors) {
  EvalSummary s;
  s.count = static_cast<int>(errors.size());
  if (errors.empty()) return s;
  double sq = 0.0, mean = 0.0;
  for (double e : errors) {
    sq += e * e;
    mean += e;
  }
  mean /= s.count;
  s.rms = std::sqrt(sq / s.count);
  double var = 0.0;
  for (double e : errors) var += (e - mean) * (e - mean);
  s.sigma = std::sqrt(var / s.count);
  return s;
}

inline EvalSummary evaluate_split(const LocalizerModel& model, const MeasurementSet& data,
                                  const std::vector<int>& idx) {
  std::vector<double> errors;
  errors.reserve(idx.size());
  for (int i : idx) {
    const Measurement& m = data.items[i];
    errors.push_back(distance(predict(model, m.mics, m.phases, m.pose.azimuth), m.pose.position));
  }
  return summarize_errors(errors);
}

/// RMS of always predicting the mean training label; the sanity baseline any
/// trained model must beat.
inline EvalSummary centroid_baseline(const MeasurementSet& data, const std::vector<int>& train_idx,
                                     const std::vector<int>& eval_idx) {
  Vec2 centroid{};
  for (int i : train_idx) centroid += data.items[i].pose.position;
  centroid = centroid / static_cast<double>(train_idx.size());
  std::vector<double> errors;
  errors.reserve(eval_idx.size());
  for (int i : eval_idx) errors.push_back(distance(centroid, data.items[i].pose.position));
  return summarize_errors(errors);
}

struct AggregationEval {
  EvalSummary per_measurement;
  EvalSummary aggregated;
};

/// Fresh noiseless measurements at every orientation for each position;
/// estimates are aggregated per position by geometric median.
inline AggregationEval evaluate_aggregation(const LocalizerModel& model, const Scene& scene,
                                            const PhaseParams& phases,
                                            const std::vector<Vec2>& positions, int orientations) {
  const PhaseTrace enc = sample_encoder(phases, scene.clock);
  std::vector<double> single_errors, agg_errors;
  for (const Vec2& pos : positions) {
    std::vector<Vec2> estimates;
    for (int j = 0; j < orientations; ++j) {
      const Pose2 pose(wrap_angle(kTwoPi * j / orientations), pos);
      const PressureTrace trace = simulate_mics(scene, pose, phases);
      const Vec2 est = predict(model, trace, enc, pose.azimuth);
      estimates.push_back(est);
      single_errors.push_back(distance(est, pos));
    }
    agg_errors.push_back(distance(geometric_median(estimates, 1e-6, 200).point, pos));
  }
  AggregationEval out;
  out.per_measurement = summarize_errors(single_errors);
  out.aggregated = summarize_errors(agg_errors);
  return out;
}

// ---------------------------------------------------------------------------
// Robustness sweeps.

struct ReportRow {
  double parameter = 0.0;  // +inf for the noiseless end of SNR sweeps
  double rms = 0.0;
  double sigma = 0.0;
  int count = 0;
};

struct ExperimentReport {
  std::string sweep;
  std::vector<ReportRow> rows;
};

inline const std::vector<std::string>& robustness_sweeps() {
  static const std::vector<std::string> names{"scale", "aspect", "shear", "gamma",
                                              "sensor_snr", "phase_snr"};
  return names;
}

inline std::vector<double> sweep_values(const std::string& sweep) {
  if (sweep == "scale" || sweep == "aspect") return {0.5, 0.75, 1.0, 1.25, 1.5, 2.0};
  if (sweep == "shear") return {0.0, 5.0, 15.0, 25.0, 35.0, 45.0};
  if (sweep == "gamma") return {0.05, 0.2, 0.35, 0.5, 0.65, 0.8, 0.95};
  if (sweep == "sensor_snr")
    return {5, 10, 15, 20, 25, 30, 35, 40, 45, 50, 55, 60, 65, 70, 75, kSnrInfinite};
  if (sweep == "phase_snr") return {5, 10, 15, 20, 25, 30, kSnrInfinite};
  throw ConfigError("unknown robustness sweep '" + sweep + "'");
}

/// Evaluates the model on regenerated test traces under one perturbation
/// family. Identity parameters (scale 1, aspect 1, shear 0, nominal gamma,
/// infinite SNR) reproduce the nominal traces bit-for-bit, so those rows
/// equal the nominal test RMS exactly.
inline ExperimentReport run_robustness(const LocalizerModel& model, const PhaseParams& phases,
                                       const Scene& scene, const Dataset& dataset,
                                       const std::string& sweep) {
  detail::check_phase_compat(phases, scene.rotor);
  ExperimentReport report;
  report.sweep = sweep;
  const std::vector<double> values = sweep_values(sweep);
  const bool is_noise = sweep == "sensor_snr" || sweep == "phase_snr";
  const PhaseTrace enc = sample_encoder(phases, scene.clock);

  std::uint64_t sweep_id = 0;
  for (std::size_t i = 0; i < robustness_sweeps().size(); ++i)
    if (robustness_sweeps()[i] == sweep) sweep_id = i;

  for (std::size_t vi = 0; vi < values.size(); ++vi) {
    const double v = values[vi];
    Scene eval_scene = scene;
    if (sweep == "scale") eval_scene.env = perturb_scale(scene.env, v);
    if (sweep == "aspect") eval_scene.env = perturb_aspect(scene.env, v);
    if (sweep == "shear") eval_scene.env = perturb_shear(scene.env, v);
    if (sweep == "gamma") eval_scene.env = Environment(scene.env.vertices, v, scene.env.max_order);

    std::vector<double> errors;
    errors.reserve(dataset.data.test.size());
    for (int rec : dataset.data.test) {
      const Measurement& item = dataset.data.items[rec];
      PressureTrace trace;
      PhaseTrace enc_used = enc;
      if (is_noise) {
        auto rng = derive_stream(dataset.spec.seed,
                                 detail::stream_tag(detail::kTagEvalNoise, sweep_id * 1024 + vi, rec));
        if (sweep == "sensor_snr") {
          trace = inject_sensor_noise(item.mics, v, rng);
        } else if (std::isinf(v)) {
          trace = item.mics;
        } else {
          const Eigen::MatrixXd noise = phase_noise_matrix(enc.samples, scene.clock.f_e, v, rng);
          enc_used.samples += noise;
          TraceSimulator sim(item.pose, scene.geom, scene.rotor, scene.mics, scene.env, scene.clock);
          trace = sim.simulate(phases, &noise);
        }
      } else {
        trace = simulate_mics(eval_scene, item.pose, phases);
      }
      errors.push_back(distance(predict(model, trace, enc_used, item.pose.azimuth), item.pose.position));
    }
    const EvalSummary s = summarize_errors(errors);
    report.rows.push_back({v, s.rms, s.sigma, s.count});
  }
  return report;
}

/// Per-batch noisy-training schedule with the levels used in the
/// experiments: sensor {25, 30, 35} dB, phase {15, 24} dB.
inline NoiseSchedule noisy_training_schedule(NoiseKind kind) {
  if (kind == NoiseKind::sensor) return {NoiseKind::sensor, {25.0, 30.0, 35.0}};
  return {NoiseKind::phase, {15.0, 24.0}};
}

inline NoiseSchedule noisy_training_schedule(NoiseKind kind, std::vector<double> levels) {
  if (levels.empty()) throw ConfigError("noisy_training_schedule: levels must be non-empty");
  return {kind, std::move(levels)};
}

// ---------------------------------------------------------------------------
// Report output. The CSV is the contract; the SVG is a convenience chart.

inline std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

inline void write_report_csv(const std::string& path, const ExperimentReport& report) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "sweep,parameter,rms,sigma,n_records\n";
  for (const ReportRow& r : report.rows)
    out << report.sweep << "," << format_double(r.parameter) << "," << format_double(r.rms) << ","
        << format_double(r.sigma) << "," << r.count << "\n";
  if (!out) throw IoError("write failed: " + path);
}

namespace detail {

/// Minimal polyline chart.
inline void write_svg_lines(const std::string& path, const std::string& title,
                            const std::vector<std::string>& labels,
                            const std::vector<std::vector<Vec2>>& series) {
  constexpr int w = 640, h = 400, margin = 50;
  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  for (const auto& s : series)
    for (const Vec2& p : s) {
      x0 = std::min(x0, p.x);
      x1 = std::max(x1, p.x);
      y0 = std::min(y0, p.y);
      y1 = std::max(y1, p.y);
    }
  if (x1 <= x0) x1 = x0 + 1;
  if (y1 <= y0) y1 = y0 + 1;
  auto px = [&](double x) { return margin + (x - x0) / (x1 - x0) * (w - 2 * margin); };
  auto py = [&](double y) { return h - margin - (y - y0) / (y1 - y0) * (h - 2 * margin); };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << w / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << title
      << "</text>\n";
  out << "<line x1=\"" << margin << "\" y1=\"" << h - margin << "\" x2=\"" << w - margin << "\" y2=\""
      << h - margin << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\"" << margin << "\" y2=\""
      << h - margin << "\" stroke=\"black\"/>\n";
  out << "<text x=\"" << margin << "\" y=\"" << h - margin + 16 << "\" font-size=\"10\">"
      << format_double(x0) << "</text>\n";
  out << "<text x=\"" << w - margin << "\" y=\"" << h - margin + 16
      << "\" text-anchor=\"end\" font-size=\"10\">" << format_double(x1) << "</text>\n";
  out << "<text x=\"" << margin - 4 << "\" y=\"" << h - margin
      << "\" text-anchor=\"end\" font-size=\"10\">" << format_double(y0) << "</text>\n";
  out << "<text x=\"" << margin - 4 << "\" y=\"" << margin
      << "\" text-anchor=\"end\" font-size=\"10\">" << format_double(y1) << "</text>\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    out << "<polyline fill=\"none\" stroke=\"" << colors[s % 6] << "\" points=\"";
    for (const Vec2& p : series[s]) out << px(p.x) << "," << py(p.y) << " ";
    out << "\"/>\n";
    if (s < labels.size())
      out << "<text x=\"" << w - margin + 4 << "\" y=\"" << margin + 14 * s << "\" font-size=\"10\" fill=\""
          << colors[s % 6] << "\">" << labels[s] << "</text>\n";
  }
  out << "</svg>\n";
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace detail

inline void write_report_svg(const std::string& path, const ExperimentReport& report) {
  std::vector<Vec2> pts;
  double max_finite = 0.0;
  for (const ReportRow& r : report.rows)
    if (std::isfinite(r.parameter)) max_finite = std::max(max_finite, r.parameter);
  for (const ReportRow& r : report.rows)
    pts.push_back({std::isfinite(r.parameter) ? r.parameter : max_finite * 1.2, r.rms});
  detail::write_svg_lines(path, "RMS vs " + report.sweep, {"rms"}, {pts});
}

inline void write_phases_svg(const std::string& path, const PhaseParams& p, int n_points = 512) {
  std::vector<std::vector<Vec2>> series(p.rotors());
  std::vector<std::string> labels;
  for (int r = 0; r < p.rotors(); ++r) {
    labels.push_back("rotor " + std::to_string(r + 1));
    for (int i = 0; i <= n_points; ++i) {
      const double t = p.period * i / n_points;
      series[r].push_back({t, phi(p, r, t)});
    }
  }
  detail::write_svg_lines(path, "phase modulation [rad] over one period", labels, series);
}

}  // namespace mavloc
