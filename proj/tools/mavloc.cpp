// SPDX-License-Identifier: Apache-2.0
//
// mavloc command-line interface. Subcommands cover the full pipeline:
// simulating traces, fitting rotor models, generating datasets, training
// (plain and joint with phase learning), evaluation, robustness sweeps and
// phase-preset export.
//
// Exit codes: 0 success, 2 bad arguments or config, 3 numerical failure,
// 4 I/O failure.

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>

#include "mavloc/mavloc.hpp"

namespace fs = std::filesystem;
using namespace mavloc;

namespace {

Pose2 parse_pose(const std::string& s) {
  double x = 0, y = 0, az = 0;
  char extra = 0;
  if (std::sscanf(s.c_str(), "%lf,%lf,%lf%c", &x, &y, &az, &extra) != 3)
    throw ConfigError("--pose expects X,Y,AZIMUTH (e.g. 2.5,2.5,0.0)");
  return Pose2(az, {x, y});
}

PhaseParams load_phases(const std::string& phases_file, const std::string& preset_name,
                        double omega) {
  if (!phases_file.empty() && !preset_name.empty())
    throw ConfigError("give either --phases or --preset, not both");
  if (!phases_file.empty()) return phases_from_json(load_json_file(phases_file));
  if (!preset_name.empty()) return preset(preset_name, omega);
  return preset("constant", omega);
}

void check_phase_match(const PhaseParams& phases, double omega) {
  if (std::abs(phases.omega - omega) > 1e-9 * omega)
    throw ConfigError("phase parameters were made for a different shaft rate than the scene");
}

int run_simulate(const std::string& scene_file, const std::string& phases_file,
                 const std::string& preset_name, const std::string& pose_str,
                 const std::string& out) {
  const Scene scene = scene_from_json(load_json_file(scene_file));
  const PhaseParams phases = load_phases(phases_file, preset_name, scene.rotor.omega);
  check_phase_match(phases, scene.rotor.omega);
  const Pose2 pose = parse_pose(pose_str);
  Measurement m;
  m.pose = pose;
  m.mics = simulate_mics(scene, pose, phases);
  m.phases = sample_encoder(phases, scene.clock);
  write_trace_file(out, m);
  std::cout << "wrote " << out << " (" << m.mics.mics() << " mics x " << m.mics.length()
            << " samples)\n";
  return 0;
}

int run_fit_rotor(const std::string& targets_dir, const std::string& init_file,
                  const std::string& out) {
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(targets_dir))
    if (entry.path().extension() == ".mavt") files.push_back(entry.path().string());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw ConfigError("no .mavt target files in " + targets_dir);

  std::vector<RotorFitTarget> targets;
  for (const std::string& f : files) {
    const Measurement m = read_trace_file(f);
    if (m.mics.mics() != 1)
      throw ConfigError(f + ": fit targets must be single-microphone traces (M = 1)");
    RotorFitTarget t;
    t.position = m.pose.position;  // measurement location in rotor coordinates
    t.trace = m.mics;
    targets.push_back(std::move(t));
  }

  const RotorSourceModel init = rotor_from_json(load_json_file(init_file));
  const RotorFitResult res = fit_rotor_model(targets, init);
  save_json_file(out, to_json(res.model));
  std::cout << "fit " << targets.size() << " targets: misfit " << res.misfit << " after "
            << res.iterations << " iterations"
            << (res.converged ? "" : " (iteration cap reached; best iterate kept)") << "\n";
  return 0;
}

int run_make_dataset(const std::string& scene_file, const std::string& spec_file,
                     const std::string& phases_file, const std::string& preset_name,
                     const std::string& out) {
  const Scene scene = scene_from_json(load_json_file(scene_file));
  const DatasetSpec spec = dataset_spec_from_json(load_json_file(spec_file));
  const PhaseParams phases = load_phases(phases_file, preset_name, scene.rotor.omega);
  check_phase_match(phases, scene.rotor.omega);
  const Dataset d = make_dataset(scene, phases, spec);
  write_dataset_file(out, d);
  std::cout << "wrote " << out << ": " << d.data.items.size() << " records (train "
            << d.data.train.size() << ", val " << d.data.val.size() << ", test "
            << d.data.test.size() << ")\n";
  return 0;
}

int run_train(const std::string& dataset_file, const std::string& config_file,
              const std::string& out) {
  const Dataset d = read_dataset_file(dataset_file);
  const TrainConfig cfg =
      config_file.empty() ? TrainConfig{} : train_config_from_json(load_json_file(config_file));
  const int mics = d.data.items.at(0).mics.mics();
  const int rotors = d.data.items.at(0).phases.rotors();
  const LocalizerModel init =
      LocalizerModel::make(d.clock, mics, rotors, FeatureConfig{}, 256, cfg.seed);
  const TrainResult res = train_localizer(d.data, init, cfg);
  write_model_file(out, res.model);
  save_history_json(out + ".json", cfg, res.history);
  double best = res.history.empty() ? 0.0 : res.history.front().val_loss;
  for (const auto& row : res.history) best = std::min(best, row.val_loss);
  std::cout << "trained " << cfg.epochs << " epochs; final train loss "
            << (res.history.empty() ? 0.0 : res.history.back().train_data) << ", best val loss "
            << best << "; wrote " << out << "\n";
  return 0;
}

int run_train_joint(const std::string& dataset_file, const std::string& scene_file,
                    const std::string& config_file, const std::string& constraints_file,
                    const std::string& phases_file, const std::string& preset_name,
                    const std::string& out, std::string out_phases) {
  const Dataset d = read_dataset_file(dataset_file);
  const Scene scene = scene_from_json(load_json_file(scene_file));
  const TrainConfig cfg =
      config_file.empty() ? TrainConfig{} : train_config_from_json(load_json_file(config_file));
  const ConstraintConfig ccfg = constraints_file.empty()
                                    ? ConstraintConfig{}
                                    : constraints_from_json(load_json_file(constraints_file));
  const PhaseParams init_phases = load_phases(phases_file, preset_name, scene.rotor.omega);
  check_phase_match(init_phases, scene.rotor.omega);
  if (out_phases.empty()) out_phases = out + ".phases.json";

  const int mics = d.data.items.at(0).mics.mics();
  const int rotors = d.data.items.at(0).phases.rotors();
  const LocalizerModel init =
      LocalizerModel::make(d.clock, mics, rotors, FeatureConfig{}, 256, cfg.seed);
  const JointResult res = train_joint(scene, split_poses(d), init_phases, init, cfg, ccfg);
  write_model_file(out, res.model);
  save_history_json(out + ".json", cfg, res.history);
  save_json_file(out_phases, to_json(res.phases));
  std::cout << "joint training done (" << cfg.joint_total_epochs() << " epochs); wrote " << out
            << " and " << out_phases << "\n";
  return 0;
}

int run_eval(const std::string& model_file, const std::string& dataset_file, int aggregate_j) {
  const LocalizerModel model = read_model_file(model_file);
  const Dataset d = read_dataset_file(dataset_file);
  const EvalSummary test = evaluate_split(model, d.data, d.data.test);
  std::cout << "test RMS: " << test.rms << " m (sigma " << test.sigma << ", " << test.count
            << " records)\n";
  if (!d.data.val.empty()) {
    const EvalSummary val = evaluate_split(model, d.data, d.data.val);
    std::cout << "val RMS: " << val.rms << " m (sigma " << val.sigma << ", " << val.count
              << " records)\n";
  }

  if (aggregate_j > 0) {
    // Group every record sharing a test position; aggregate the first J
    // orientations of each group by geometric median.
    std::vector<Vec2> positions;
    std::vector<double> errors;
    for (int rec : d.data.test) {
      const Vec2 pos = d.data.items[rec].pose.position;
      bool seen = false;
      for (const Vec2& p : positions) seen = seen || distance(p, pos) < 1e-9;
      if (seen) continue;
      positions.push_back(pos);
      std::vector<Measurement> group;
      for (const auto& item : d.data.items)
        if (distance(item.pose.position, pos) < 1e-9 &&
            static_cast<int>(group.size()) < aggregate_j)
          group.push_back(item);
      errors.push_back(distance(aggregate_estimates(model, group), pos));
    }
    const EvalSummary agg = summarize_errors(errors);
    std::cout << "aggregated RMS (J=" << aggregate_j << "): " << agg.rms << " m over " << agg.count
              << " positions\n";
  }
  return 0;
}

int run_robustness_cmd(const std::string& model_file, const std::string& phases_file,
                       const std::string& preset_name, const std::string& scene_file,
                       const std::string& dataset_file, const std::string& sweep,
                       const std::string& out, const std::string& svg) {
  const LocalizerModel model = read_model_file(model_file);
  const Scene scene = scene_from_json(load_json_file(scene_file));
  const Dataset d = read_dataset_file(dataset_file);
  const PhaseParams phases = load_phases(phases_file, preset_name, scene.rotor.omega);
  check_phase_match(phases, scene.rotor.omega);
  const ExperimentReport report = run_robustness(model, phases, scene, d, sweep);
  write_report_csv(out, report);
  if (!svg.empty()) write_report_svg(svg, report);
  std::cout << "wrote " << out << " (" << report.rows.size() << " rows)\n";
  return 0;
}

int run_phases(const std::string& preset_name, double omega_rps, const std::string& out,
               const std::string& plot) {
  const PhaseParams p = preset(preset_name, kTwoPi * omega_rps);
  if (out.empty() && plot.empty()) throw ConfigError("phases: need --out and/or --plot");
  if (!out.empty()) save_json_file(out, to_json(p));
  if (!plot.empty()) write_phases_svg(plot, p);
  std::cout << "preset '" << preset_name << "' (period " << p.period << " s)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mavloc: multirotor self-noise localization simulator and trainer"};
  app.require_subcommand(1);

  auto* simulate = app.add_subcommand("simulate", "simulate one capture and write a MAVT trace");
  std::string sim_scene, sim_phases, sim_preset, sim_pose, sim_out;
  simulate->add_option("--scene", sim_scene, "scene JSON")->required();
  simulate->add_option("--phases", sim_phases, "phase parameters JSON");
  simulate->add_option("--preset", sim_preset, "phase preset name");
  simulate->add_option("--pose", sim_pose, "aircraft pose X,Y,AZIMUTH")->required();
  simulate->add_option("--out", sim_out, "output trace file")->required();

  auto* fit = app.add_subcommand("fit-rotor", "fit rotor harmonics to target traces");
  std::string fit_targets, fit_init, fit_out;
  fit->add_option("--targets", fit_targets, "directory of single-mic .mavt target traces")
      ->required();
  fit->add_option("--init", fit_init, "initial rotor model JSON")->required();
  fit->add_option("--out", fit_out, "fitted rotor model JSON")->required();

  auto* mkds = app.add_subcommand("make-dataset", "generate a pose-grid dataset");
  std::string ds_scene, ds_spec, ds_phases, ds_preset, ds_out;
  mkds->add_option("--scene", ds_scene, "scene JSON")->required();
  mkds->add_option("--spec", ds_spec, "dataset spec JSON")->required();
  mkds->add_option("--phases", ds_phases, "phase parameters JSON");
  mkds->add_option("--preset", ds_preset, "phase preset name (default: constant)");
  mkds->add_option("--out", ds_out, "output dataset file")->required();

  auto* train = app.add_subcommand("train", "train the localizer on a dataset");
  std::string tr_dataset, tr_config, tr_out;
  train->add_option("--dataset", tr_dataset, "dataset file")->required();
  train->add_option("--config", tr_config, "train config JSON");
  train->add_option("--out", tr_out, "output model checkpoint")->required();

  auto* joint = app.add_subcommand("train-joint", "joint phase-modulation and localizer training");
  std::string j_dataset, j_scene, j_config, j_constraints, j_phases, j_preset, j_out, j_out_phases;
  joint->add_option("--dataset", j_dataset, "dataset file (poses and split)")->required();
  joint->add_option("--scene", j_scene, "scene JSON (simulation in the loop)")->required();
  joint->add_option("--config", j_config, "train config JSON");
  joint->add_option("--constraints", j_constraints, "constraint config JSON");
  joint->add_option("--phases", j_phases, "initial phase parameters JSON");
  joint->add_option("--preset", j_preset, "initial phase preset (default: constant)");
  joint->add_option("--out", j_out, "output model checkpoint")->required();
  joint->add_option("--out-phases", j_out_phases, "output phases JSON (default: OUT.phases.json)");

  auto* eval = app.add_subcommand("eval", "evaluate a model on a dataset's test split");
  std::string e_model, e_dataset;
  int e_aggregate = 0;
  eval->add_option("--model", e_model, "model checkpoint")->required();
  eval->add_option("--dataset", e_dataset, "dataset file")->required();
  eval->add_option("--aggregate", e_aggregate, "aggregate J orientations per test position");

  auto* rob = app.add_subcommand("robustness", "evaluate under a perturbation sweep");
  std::string r_model, r_phases, r_preset, r_scene, r_dataset, r_sweep, r_out, r_svg;
  rob->add_option("--model", r_model, "model checkpoint")->required();
  rob->add_option("--phases", r_phases, "phase parameters JSON");
  rob->add_option("--preset", r_preset, "phase preset name");
  rob->add_option("--scene", r_scene, "nominal scene JSON")->required();
  rob->add_option("--dataset", r_dataset, "dataset file (test split)")->required();
  rob->add_option("--sweep", r_sweep, "scale|aspect|shear|gamma|sensor_snr|phase_snr")->required();
  rob->add_option("--out", r_out, "output CSV")->required();
  rob->add_option("--svg", r_svg, "optional SVG chart");

  auto* ph = app.add_subcommand("phases", "export a phase preset");
  std::string p_preset, p_out, p_plot;
  double p_omega_rps = kDefaultOmegaRps;
  ph->add_option("--preset", p_preset, "constant|slow_sine|fast_sine|gradual_freq|offset")
      ->required();
  ph->add_option("--omega-rps", p_omega_rps, "shaft rate [rev/s]");
  ph->add_option("--out", p_out, "output phases JSON");
  ph->add_option("--plot", p_plot, "output SVG plot");

  try {
    app.parse(argc, argv);
    if (simulate->parsed()) return run_simulate(sim_scene, sim_phases, sim_preset, sim_pose, sim_out);
    if (fit->parsed()) return run_fit_rotor(fit_targets, fit_init, fit_out);
    if (mkds->parsed()) return run_make_dataset(ds_scene, ds_spec, ds_phases, ds_preset, ds_out);
    if (train->parsed()) return run_train(tr_dataset, tr_config, tr_out);
    if (joint->parsed())
      return run_train_joint(j_dataset, j_scene, j_config, j_constraints, j_phases, j_preset, j_out,
                             j_out_phases);
    if (eval->parsed()) return run_eval(e_model, e_dataset, e_aggregate);
    if (rob->parsed())
      return run_robustness_cmd(r_model, r_phases, r_preset, r_scene, r_dataset, r_sweep, r_out,
                                r_svg);
    if (ph->parsed()) return run_phases(p_preset, p_omega_rps, p_out, p_plot);
    return 2;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
