// Identification demo: fit the multistep predictor on noisy synthetic
// training days and print the validation MAE per prediction step on a
// held-out day with different weather.

#include <cstdio>

#include "demo_common.hpp"

int main() {
  using namespace railtherm;
  demo::PlantBundle plant;

  std::puts("fitting on 3 training days (0.05 K measurement noise)...");
  predictor::PredictorModel model = demo::train_predictor(plant, 3, 42, 0.05);
  std::printf("model: rho=%d horizon=%d, %ld windows, regularized=%s\n", model.rho,
              model.horizon, model.meta.n_cols, model.meta.regularized ? "yes" : "no");

  // Held-out validation day (different seed -> different weather/occupancy).
  harness::Scenario val = demo::make_scenario(plant, harness::make_training_days(1, 99),
                                              86400.0, 99);
  val.config.excitation_amplitude = 1.5;
  harness::RunResult run = harness::run_closed_loop(val, harness::RunMode::Deactivated);
  pipeline::Trajectory traj = harness::trajectory_from_runlog(run.log, 300.0);
  traj = harness::add_measurement_noise(traj, 0.05, 100);

  predictor::MaeReport rep = predictor::evaluate_mae(model, {traj});
  std::printf("validation windows: %ld\n", rep.windows);
  for (int k = 0; k < rep.per_step.size(); ++k) {
    std::printf("  step %d (%d min ahead): MAE %.4f K\n", k + 1, (k + 1) * 5, rep.per_step[k]);
  }
  std::printf("overall MAE: %.4f K\n", rep.overall);
  return 0;
}
