// Command-line front end for the coach thermal toolkit.
//
//   railtherm ingest    raw CSV logs -> uniform trajectories
//   railtherm fit       trajectories -> multistep predictor model
//   railtherm evaluate  model + trajectories -> multistep MAE report
//   railtherm simulate  scenario -> closed-loop run logs
//   railtherm compare   two run logs -> energy savings / comfort report
//   railtherm report    scenario -> A/B runs + comparison CSVs + SVG charts
//
// Every subcommand exits 0 only when the checks along its path pass
// (config invariants, solver health, validation thresholds) and 1 otherwise.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "railtherm/data_pipeline.hpp"
#include "railtherm/ddpc.hpp"
#include "railtherm/harness.hpp"
#include "railtherm/transient_predictor.hpp"

namespace fs = std::filesystem;
using namespace railtherm;

namespace {

int cmd_ingest(const std::string& hvac, const std::string& weather, const std::string& trips,
               double period_s, int min_length, const std::string& config,
               const std::string& out_dir) {
  if (min_length <= 0) {
    if (!config.empty()) {
      ddpc::DdpcConfig dc = ddpc::DdpcConfig::from_config(cfg::KeyValueFile::load(config));
      min_length = dc.rho + dc.horizon;
    } else {
      min_length = ddpc::DdpcConfig{}.rho + ddpc::DdpcConfig{}.horizon;
    }
  }
  pipeline::RawRecordSet raw = pipeline::load_raw_records(hvac, weather, trips);
  auto fused = pipeline::fuse(raw);
  pipeline::UniformSeries series = pipeline::resample(fused, period_s);
  auto [trajs, summary] = pipeline::segment_filter(series, min_length);
  if (trajs.empty()) {
    std::cerr << "ingest: no usable trajectory of " << min_length << "+ samples\n";
    return 1;
  }
  pipeline::write_trajectory_dir(trajs, out_dir);
  csv::write_csv((fs::path(out_dir) / "summary.csv").string(),
                 {"period_s", "n_trajectories", "n_samples", "mean_length", "n_dropped_short",
                  "total_cells", "gap_cells", "nonregular_cells"},
                 {{csv::format_double(summary.period_s), std::to_string(summary.n_trajectories),
                   std::to_string(summary.n_samples), csv::format_double(summary.mean_length),
                   std::to_string(summary.n_dropped_short), std::to_string(summary.total_cells),
                   std::to_string(summary.gap_cells), std::to_string(summary.nonregular_cells)}});
  std::cout << "ingest: " << summary.n_trajectories << " trajectories (mean length "
            << summary.mean_length << " samples at " << summary.period_s << " s), "
            << summary.gap_cells << " gap cells, " << summary.nonregular_cells
            << " non-regular cells, " << summary.n_dropped_short << " short runs dropped -> "
            << out_dir << "\n";
  return 0;
}

int cmd_fit(const std::string& data_dir, const std::string& config, int downsample_factor,
            const std::string& out_path) {
  ddpc::DdpcConfig dc = ddpc::DdpcConfig::from_config(cfg::KeyValueFile::load(config));
  std::vector<pipeline::Trajectory> trajs = pipeline::load_trajectory_dir(data_dir);
  if (downsample_factor > 1) {
    for (auto& t : trajs) t = pipeline::downsample(t, downsample_factor);
  }
  pipeline::HankelSet hs = pipeline::build_hankel(trajs, dc.rho, dc.horizon);
  predictor::PredictorModel model = predictor::fit(hs);
  predictor::save_model(model, out_path);
  std::cout << "fit: rho=" << model.rho << " horizon=" << model.horizon << " from " << hs.cols()
            << " windows (" << hs.skipped_short << " trajectories too short), digest "
            << model.meta.data_digest << " -> " << out_path << "\n";
  return 0;
}

int cmd_evaluate(const std::string& model_path, const std::string& data_dir, double max_mae) {
  predictor::PredictorModel model = predictor::load_model(model_path);
  std::vector<pipeline::Trajectory> trajs = pipeline::load_trajectory_dir(data_dir);
  predictor::MaeReport rep = predictor::evaluate_mae(model, trajs);
  std::cout << "evaluate: " << rep.windows << " windows\n";
  for (int k = 0; k < rep.per_step.size(); ++k) {
    std::cout << "  step " << (k + 1) << ": MAE " << rep.per_step[k] << " K\n";
  }
  std::cout << "  overall: " << rep.overall << " K\n";
  if (max_mae >= 0.0 && rep.per_step.maxCoeff() > max_mae) {
    std::cerr << "evaluate: MAE " << rep.per_step.maxCoeff() << " K exceeds bound " << max_mae
              << " K\n";
    return 1;
  }
  return 0;
}

// Runs one scenario in one mode; returns the result and appends log files.
harness::RunResult run_and_write(const harness::Scenario& sc, harness::RunMode mode,
                                 const std::string& out_dir) {
  harness::RunResult res = harness::run_closed_loop(sc, mode);
  res.log.energy_kwh = harness::energy_account(res.log, sc.config.cop, sc.config.eta_heat);
  fs::create_directories(out_dir);
  const std::string base = sc.config.name + "_" + harness::to_string(mode);
  harness::write_runlog_csv(res.log, (fs::path(out_dir) / (base + ".csv")).string());
  if (mode == harness::RunMode::Activated) {
    harness::write_controller_log_csv(res.controller_log,
                                      (fs::path(out_dir) / (base + "_controller.csv")).string());
  }
  std::cout << harness::to_string(mode) << ": surrogate energy " << res.log.energy_kwh
            << " kWh over " << res.log.duration_s() / 3600.0 << " h\n";
  return res;
}

// Health check on an activated run: every optimized step must have solved.
int count_degraded(const std::vector<ddpc::Controller::StepRecord>& log) {
  int n = 0;
  for (const auto& r : log) {
    if (!r.warmup && (r.fallback || r.status != qp::Status::Optimal)) ++n;
  }
  return n;
}

int cmd_simulate(const std::string& config, std::string mode, std::optional<std::uint64_t> seed,
                 const std::string& out_dir) {
  harness::ScenarioConfig sc_cfg = harness::ScenarioConfig::from_file(config);
  if (!mode.empty()) sc_cfg.mode = mode;
  if (seed) sc_cfg.seed = *seed;
  sc_cfg.validate();
  harness::Scenario sc = harness::Scenario::load(sc_cfg);

  int degraded = 0;
  if (sc_cfg.mode == "deactivated" || sc_cfg.mode == "both") {
    run_and_write(sc, harness::RunMode::Deactivated, out_dir);
  }
  if (sc_cfg.mode == "activated" || sc_cfg.mode == "both") {
    harness::RunResult act = run_and_write(sc, harness::RunMode::Activated, out_dir);
    degraded = count_degraded(act.controller_log);
  }
  if (degraded > 0) {
    std::cerr << "simulate: " << degraded << " control steps fell back (solver not optimal)\n";
    return 1;
  }
  return 0;
}

int cmd_compare(const std::string& a_path, const std::string& b_path, double steady_start_s,
                double t_max, double cop, double eta, const std::string& out_path) {
  harness::RunLog a = harness::load_runlog_csv(a_path);
  harness::RunLog b = harness::load_runlog_csv(b_path);
  harness::CompareReport rep = harness::compare(a, b, steady_start_s, t_max, cop, eta);
  if (!out_path.empty()) harness::write_compare_csv(rep, out_path);
  std::printf("compare window [%g, %g] s\n", rep.steady_start_s, rep.end_s);
  std::printf("  energy: candidate %.4f kWh, baseline %.4f kWh, savings %.2f %%\n",
              rep.energy_a_kwh, rep.energy_b_kwh, rep.savings_pct);
  std::printf("  avg hourly comfort violation: candidate %.4f K, baseline %.4f K\n",
              rep.violation_a_k, rep.violation_b_k);
  return 0;
}

int cmd_report(const std::string& config, std::optional<std::uint64_t> seed,
               const std::string& out_dir) {
  harness::ScenarioConfig sc_cfg = harness::ScenarioConfig::from_file(config);
  if (seed) sc_cfg.seed = *seed;
  harness::Scenario sc = harness::Scenario::load(sc_cfg);

  harness::RunResult act = harness::run_closed_loop(sc, harness::RunMode::Activated);
  harness::RunResult deact = harness::run_closed_loop(sc, harness::RunMode::Deactivated);
  act.log.energy_kwh = harness::energy_account(act.log, sc_cfg.cop, sc_cfg.eta_heat);
  deact.log.energy_kwh = harness::energy_account(deact.log, sc_cfg.cop, sc_cfg.eta_heat);

  double steady = sc_cfg.steady_start_or_default(sc.ddpc_cfg.rho);
  harness::CompareReport rep = harness::compare(act.log, deact.log, steady, sc.ddpc_cfg.t_max,
                                                sc_cfg.cop, sc_cfg.eta_heat);
  harness::emit_report(out_dir, sc_cfg.name, act.log, deact.log, rep, sc.ddpc_cfg.t_max,
                       sc_cfg.cop, sc_cfg.eta_heat);
  harness::write_controller_log_csv(
      act.controller_log, (fs::path(out_dir) / (sc_cfg.name + "_controller.csv")).string());

  std::printf("report: %s -> %s\n", sc_cfg.name.c_str(), out_dir.c_str());
  std::printf("  energy: activated %.4f kWh, baseline %.4f kWh, savings %.2f %%\n",
              rep.energy_a_kwh, rep.energy_b_kwh, rep.savings_pct);
  std::printf("  avg hourly comfort violation: activated %.4f K, baseline %.4f K\n",
              rep.violation_a_k, rep.violation_b_k);

  int degraded = count_degraded(act.controller_log);
  if (degraded > 0) {
    std::cerr << "report: " << degraded << " control steps fell back (solver not optimal)\n";
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Train-coach thermal toolkit: data pipeline, predictor fitting and closed-loop "
               "setpoint-optimization experiments"};
  app.require_subcommand(1);

  // ingest
  std::string in_hvac, in_weather, in_trips, in_config, in_out;
  double in_period = 300.0;
  int in_min_length = 0;
  CLI::App* ingest = app.add_subcommand("ingest", "Raw CSV logs -> uniform trajectories");
  ingest->add_option("--hvac", in_hvac, "HVAC log CSV")->required();
  ingest->add_option("--weather", in_weather, "Weather log CSV")->required();
  ingest->add_option("--trips", in_trips, "Trip occupancy CSV")->required();
  ingest->add_option("--period", in_period, "Resampling period (s)");
  ingest->add_option("--min-length", in_min_length,
                     "Minimum samples per kept trajectory (default: past window + horizon)");
  ingest->add_option("--config", in_config, "Parameter file (supplies the default min length)");
  ingest->add_option("--out", in_out, "Output directory")->required();

  // fit
  std::string fit_data, fit_config, fit_out;
  int fit_ds = 1;
  CLI::App* fit = app.add_subcommand("fit", "Trajectories -> multistep predictor model");
  fit->add_option("--data", fit_data, "Trajectory directory (from ingest)")->required();
  fit->add_option("--config", fit_config, "Parameter file (rho, horizon)")->required();
  fit->add_option("--downsample", fit_ds, "Bin-mean decimation factor before fitting");
  fit->add_option("--out", fit_out, "Model output path")->required();

  // evaluate
  std::string ev_model, ev_data;
  double ev_max_mae = -1.0;
  CLI::App* evaluate = app.add_subcommand("evaluate", "Model + trajectories -> multistep MAE");
  evaluate->add_option("--model", ev_model, "Model file")->required();
  evaluate->add_option("--data", ev_data, "Validation trajectory directory")->required();
  evaluate->add_option("--max-mae", ev_max_mae, "Fail when any step MAE exceeds this bound (K)");

  // simulate
  std::string sim_config, sim_mode, sim_out;
  std::optional<std::uint64_t> sim_seed;
  CLI::App* simulate = app.add_subcommand("simulate", "Scenario -> closed-loop run logs");
  simulate->add_option("--config", sim_config, "Scenario config file")->required();
  simulate->add_option("--mode", sim_mode, "activated | deactivated | both")
      ->check(CLI::IsMember({"activated", "deactivated", "both"}));
  simulate->add_option("--seed", sim_seed, "Noise seed override");
  simulate->add_option("--out", sim_out, "Output directory")->required();

  // compare
  std::string cmp_a, cmp_b, cmp_out;
  double cmp_steady = 0.0, cmp_t_max = 2.0, cmp_cop = 3.0, cmp_eta = 1.0;
  CLI::App* compare = app.add_subcommand("compare", "Two run logs -> savings / comfort report");
  compare->add_option("--candidate", cmp_a, "Candidate run log CSV (e.g. activated)")->required();
  compare->add_option("--baseline", cmp_b, "Baseline run log CSV")->required();
  compare->add_option("--steady-start", cmp_steady, "Steady-state window start (s)")->required();
  compare->add_option("--t-max", cmp_t_max, "Comfort band half-width (K)");
  compare->add_option("--cop", cmp_cop, "Cooling coefficient of performance");
  compare->add_option("--eta", cmp_eta, "Heating efficiency");
  compare->add_option("--out", cmp_out, "Comparison CSV output path");

  // report
  std::string rep_config, rep_out;
  std::optional<std::uint64_t> rep_seed;
  CLI::App* report = app.add_subcommand("report", "Scenario -> A/B comparison + SVG charts");
  report->add_option("--config", rep_config, "Scenario config file")->required();
  report->add_option("--seed", rep_seed, "Noise seed override");
  report->add_option("--out", rep_out, "Output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (ingest->parsed()) {
      return cmd_ingest(in_hvac, in_weather, in_trips, in_period, in_min_length, in_config,
                        in_out);
    }
    if (fit->parsed()) return cmd_fit(fit_data, fit_config, fit_ds, fit_out);
    if (evaluate->parsed()) return cmd_evaluate(ev_model, ev_data, ev_max_mae);
    if (simulate->parsed()) return cmd_simulate(sim_config, sim_mode, sim_seed, sim_out);
    if (compare->parsed()) {
      return cmd_compare(cmp_a, cmp_b, cmp_steady, cmp_t_max, cmp_cop, cmp_eta, cmp_out);
    }
    if (report->parsed()) return cmd_report(rep_config, rep_seed, rep_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
