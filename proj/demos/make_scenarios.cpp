// Regenerates the shipped scenario artifacts: day schedules, per-scenario
// parameter files (base parameters plus optimizer overrides), the shared
// predictor model fitted on synthetic training days, and the scenario
// configuration files. Deterministic: rerunning reproduces identical files.
//
//   make_scenarios [base_params=data/default_params.cfg] [out_dir=data/scenarios]

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "demo_common.hpp"

namespace fs = std::filesystem;
using namespace railtherm;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

// Optimizer-weight overrides appended to the base parameter text; later keys
// win, so the scenario files stay a strict superset of the base file.
std::string override_block(const demo::PlantBundle& plant) {
  std::ostringstream ss;
  ss << "\n# scenario overrides\n"
     << "ddpc.sigma = " << csv::format_double(plant.ddpc_cfg.sigma) << "\n"
     << "ddpc.t_max_inner = " << csv::format_double(plant.ddpc_cfg.t_max_inner) << "\n";
  return ss.str();
}

std::string vec3_text(const Vec3& v) {
  return csv::format_double(v[0]) + " " + csv::format_double(v[1]) + " " +
         csv::format_double(v[2]);
}

void write_scenario_cfg(const fs::path& dir, demo::Day day, const std::string& params_name) {
  const harness::Scenario sc = demo::shipped_scenario(day);
  const std::string name = demo::day_name(day);
  std::ostringstream ss;
  ss << "# generated by make_scenarios - synthetic desk-scale experiment\n"
     << "scenario.name = " << name << "\n"
     << "scenario.params = " << params_name << "\n"
     << "scenario.schedule = " << name << ".csv\n"
     << "scenario.model = predictor_model.txt\n"
     << "scenario.duration_s = " << csv::format_double(sc.config.duration_s) << "\n"
     << "scenario.control_period_s = " << csv::format_double(sc.config.control_period_s) << "\n"
     << "scenario.dt_s = " << csv::format_double(sc.config.dt_s) << "\n"
     << "scenario.mode = both\n"
     << "scenario.seed = " << sc.config.seed << "\n"
     << "scenario.noise_sigma = " << csv::format_double(sc.config.noise_sigma) << "\n"
     << "scenario.init_t_room = " << vec3_text(sc.config.init_t_room) << "\n"
     << "scenario.init_t_inv = " << vec3_text(sc.config.init_t_inv) << "\n"
     << "scenario.init_t_chassis = " << vec3_text(sc.config.init_t_chassis) << "\n";
  spit(dir / (name + ".cfg"), ss.str());
}

}  // namespace

int main(int argc, char** argv) {
  const std::string base_params = argc > 1 ? argv[1] : "data/default_params.cfg";
  const fs::path out_dir = argc > 2 ? argv[2] : "data/scenarios";
  fs::create_directories(out_dir);

  // Schedules.
  for (demo::Day day : {demo::Day::Cold, demo::Day::Hot, demo::Day::March}) {
    harness::write_schedule_csv(demo::shipped_schedule(day),
                                (out_dir / (std::string(demo::day_name(day)) + ".csv")).string());
  }

  // Per-scenario parameter files.
  const std::string base = slurp(base_params);
  spit(out_dir / "params_cold.cfg", base + override_block(demo::shipped_plant(demo::Day::Cold)));
  spit(out_dir / "params_hot.cfg", base + override_block(demo::shipped_plant(demo::Day::Hot)));
  spit(out_dir / "params_march.cfg",
       base + override_block(demo::shipped_plant(demo::Day::March)));

  // Shared predictor model (the plant is identical across scenarios).
  std::puts("training shared predictor model (3 synthetic days)...");
  predictor::PredictorModel model = demo::shipped_model();
  predictor::save_model(model, (out_dir / "predictor_model.txt").string());

  // Scenario configs.
  write_scenario_cfg(out_dir, demo::Day::Cold, "params_cold.cfg");
  write_scenario_cfg(out_dir, demo::Day::Hot, "params_hot.cfg");
  write_scenario_cfg(out_dir, demo::Day::March, "params_march.cfg");

  std::printf("scenario artifacts written to %s\n", out_dir.string().c_str());
  return 0;
}
