#pragma once

// Closed-loop experiment harness: loads a scenario (thermal parameters, HVAC
// stack configuration, optimizer settings, disturbance schedule, predictor
// model), runs the coach simulator against either the plain rule-based
// setpoint (deactivated) or the predictive setpoint optimizer (activated),
// accounts surrogate electrical energy, compares A/B runs over a steady-state
// window, and writes CSV + SVG reports.
//
// Sign conventions and units match the rest of the library: temperatures in
// degrees Celsius, heat flows in Watts, energies in kWh.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "railtherm/coach_sim.hpp"
#include "railtherm/config.hpp"
#include "railtherm/csv.hpp"
#include "railtherm/data_pipeline.hpp"
#include "railtherm/ddpc.hpp"
#include "railtherm/hvac_stack.hpp"
#include "railtherm/svg_plot.hpp"
#include "railtherm/transient_predictor.hpp"
#include "railtherm/types.hpp"

namespace railtherm::harness {

inline constexpr double kPi = std::numbers::pi;

// ---------------------------------------------------------------------------
// Disturbance schedule (zero-order hold)
// ---------------------------------------------------------------------------

inline const std::vector<std::string> kScheduleHeader = {
    "time_s",        "t_amb_c",  "q_g_wm2", "alpha_rad", "beta_rad",
    "theta_rad",     "occupancy_pct", "speed_ms", "door_open"};

struct DisturbanceSchedule {
  std::vector<double> time_s;
  std::vector<coach::DisturbanceSample> samples;

  void validate() const {
    if (time_s.empty() || time_s.size() != samples.size()) {
      throw std::runtime_error("harness: disturbance schedule is empty or inconsistent");
    }
    for (std::size_t i = 1; i < time_s.size(); ++i) {
      if (!(time_s[i] > time_s[i - 1])) {
        throw std::runtime_error("harness: schedule times must be strictly increasing");
      }
    }
    for (const auto& s : samples) s.validate();
  }

  // Zero-order hold: the sample at or before `t` (clamped to the ends).
  const coach::DisturbanceSample& at(double t) const {
    if (samples.empty()) throw std::runtime_error("harness: empty disturbance schedule");
    auto it = std::upper_bound(time_s.begin(), time_s.end(), t);
    if (it == time_s.begin()) return samples.front();
    return samples[static_cast<std::size_t>(it - time_s.begin()) - 1];
  }

  double end_time() const { return time_s.empty() ? 0.0 : time_s.back(); }
};

inline DisturbanceSchedule load_schedule_csv(const std::string& path) {
  csv::Table t = csv::read_csv(path);
  pipeline::require_header(t, kScheduleHeader);
  DisturbanceSchedule out;
  out.time_s.reserve(t.rows.size());
  out.samples.reserve(t.rows.size());
  for (const auto& r : t.rows) {
    out.time_s.push_back(csv::to_double(r[0], "time_s"));
    coach::DisturbanceSample d;
    d.t_amb_c = csv::to_double(r[1], "t_amb_c");
    d.q_g_w_per_m2 = csv::to_double(r[2], "q_g_wm2");
    d.alpha_rad = csv::to_double(r[3], "alpha_rad");
    d.beta_rad = csv::to_double(r[4], "beta_rad");
    d.theta_rad = csv::to_double(r[5], "theta_rad");
    d.occupancy_pct = csv::to_double(r[6], "occupancy_pct");
    d.speed_ms = csv::to_double(r[7], "speed_ms");
    double door = csv::to_double(r[8], "door_open");
    if (door != 0.0 && door != 1.0) {
      throw std::runtime_error(path + ": door_open must be 0 or 1");
    }
    d.door_open = door != 0.0;
    out.samples.push_back(d);
  }
  out.validate();
  return out;
}

inline void write_schedule_csv(const DisturbanceSchedule& sched, const std::string& path) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(sched.time_s.size());
  for (std::size_t i = 0; i < sched.time_s.size(); ++i) {
    const auto& d = sched.samples[i];
    rows.push_back({csv::format_double(sched.time_s[i]), csv::format_double(d.t_amb_c),
                    csv::format_double(d.q_g_w_per_m2), csv::format_double(d.alpha_rad),
                    csv::format_double(d.beta_rad), csv::format_double(d.theta_rad),
                    csv::format_double(d.occupancy_pct), csv::format_double(d.speed_ms),
                    d.door_open ? "1" : "0"});
  }
  csv::write_csv(path, kScheduleHeader, rows);
}

// ---------------------------------------------------------------------------
// Scenario configuration
// ---------------------------------------------------------------------------

enum class RunMode { Activated, Deactivated };

inline const char* to_string(RunMode m) {
  return m == RunMode::Activated ? "activated" : "deactivated";
}

struct ScenarioConfig {
  std::string name = "scenario";
  std::filesystem::path params_file;    // key-value file: thermal + hvac + ddpc
  std::filesystem::path schedule_file;  // disturbance schedule CSV
  std::filesystem::path model_file;     // predictor model (required for activated runs)

  double duration_s = 86400.0;
  double control_period_s = 300.0;
  double dt_s = 10.0;
  std::string mode = "both";  // activated | deactivated | both

  std::uint64_t seed = 1;
  double noise_sigma = 0.0;     // measurement noise into the optimizer (K)
  double steady_start_s = -1.0; // < 0: warm-up end + 45 min

  double cop = 3.0;        // cooling surrogate coefficient of performance
  double eta_heat = 1.0;   // heating surrogate efficiency

  Vec3 init_t_room = Vec3::Constant(18.0);
  Vec3 init_t_inv = Vec3::Constant(18.0);
  Vec3 init_t_chassis = Vec3::Constant(14.0);

  // Deactivated-mode setpoint dither for generating identification data:
  // u = t_rule + uniform(-amplitude, amplitude), redrawn every control period.
  double excitation_amplitude = 0.0;

  void validate() const {
    if (!(dt_s > 0.0)) throw std::runtime_error("harness: dt must be > 0");
    if (!(control_period_s > 0.0) || !(duration_s > 0.0)) {
      throw std::runtime_error("harness: durations must be > 0");
    }
    double ratio = control_period_s / dt_s;
    if (std::abs(ratio - std::round(ratio)) > 1e-9) {
      throw std::runtime_error("harness: control period must be a multiple of dt");
    }
    double steps = duration_s / dt_s;
    if (std::abs(steps - std::round(steps)) > 1e-9) {
      throw std::runtime_error("harness: duration must be a multiple of dt");
    }
    if (duration_s < control_period_s) {
      throw std::runtime_error("harness: duration must cover at least one control period");
    }
    if (!(cop > 0.0)) throw std::runtime_error("harness: cop must be > 0");
    if (!(eta_heat > 0.0)) throw std::runtime_error("harness: eta_heat must be > 0");
    if (!(noise_sigma >= 0.0)) throw std::runtime_error("harness: noise sigma must be >= 0");
    if (!(excitation_amplitude >= 0.0)) {
      throw std::runtime_error("harness: excitation amplitude must be >= 0");
    }
    if (mode != "activated" && mode != "deactivated" && mode != "both") {
      throw std::runtime_error("harness: mode must be activated, deactivated or both");
    }
  }

  double warmup_s(int rho) const { return rho * control_period_s; }
  double steady_start_or_default(int rho) const {
    return steady_start_s >= 0.0 ? steady_start_s : warmup_s(rho) + 45.0 * 60.0;
  }

  static ScenarioConfig from_file(const std::string& path) {
    cfg::KeyValueFile kv = cfg::KeyValueFile::load(path);
    const std::filesystem::path base = std::filesystem::path(path).parent_path();
    auto resolve = [&](const std::string& rel) {
      std::filesystem::path p(rel);
      return p.is_absolute() ? p : base / p;
    };
    ScenarioConfig c;
    c.name = kv.text_or("scenario.name", std::filesystem::path(path).stem().string());
    c.params_file = resolve(kv.text("scenario.params"));
    c.schedule_file = resolve(kv.text("scenario.schedule"));
    if (kv.has("scenario.model")) c.model_file = resolve(kv.text("scenario.model"));
    c.duration_s = kv.number_or("scenario.duration_s", c.duration_s);
    c.control_period_s = kv.number_or("scenario.control_period_s", c.control_period_s);
    c.dt_s = kv.number_or("scenario.dt_s", c.dt_s);
    c.mode = kv.text_or("scenario.mode", c.mode);
    c.seed = static_cast<std::uint64_t>(kv.number_or("scenario.seed", 1.0));
    c.noise_sigma = kv.number_or("scenario.noise_sigma", c.noise_sigma);
    c.steady_start_s = kv.number_or("scenario.steady_start_s", c.steady_start_s);
    c.cop = kv.number_or("scenario.cop", c.cop);
    c.eta_heat = kv.number_or("scenario.eta_heat", c.eta_heat);
    auto vec3_or = [&](const std::string& key, const Vec3& dflt) {
      if (!kv.has(key)) return dflt;
      auto v = kv.numbers_n(key, 3);
      return Vec3(v[0], v[1], v[2]);
    };
    c.init_t_room = vec3_or("scenario.init_t_room", c.init_t_room);
    c.init_t_inv = vec3_or("scenario.init_t_inv", c.init_t_inv);
    c.init_t_chassis = vec3_or("scenario.init_t_chassis", c.init_t_chassis);
    c.excitation_amplitude =
        kv.number_or("scenario.excitation_amplitude", c.excitation_amplitude);
    c.validate();
    return c;
  }
};

// A fully loaded scenario: config plus every referenced artifact.
struct Scenario {
  ScenarioConfig config;
  coach::ThermalParams thermal;
  coach::HeatDistribution distribution;
  hvac::HvacConfig hvac_cfg;
  ddpc::DdpcConfig ddpc_cfg;
  DisturbanceSchedule schedule;
  bool has_model = false;
  predictor::PredictorModel model;

  static Scenario load(const ScenarioConfig& cfg) {
    cfg.validate();
    Scenario sc;
    sc.config = cfg;
    cfg::KeyValueFile kv = cfg::KeyValueFile::load(cfg.params_file.string());
    sc.thermal = coach::ThermalParams::from_config(kv);
    sc.distribution = coach::heat_distribution_from_config(kv);
    sc.hvac_cfg = hvac::HvacConfig::from_config(kv);
    sc.ddpc_cfg = ddpc::DdpcConfig::from_config(kv);
    sc.schedule = load_schedule_csv(cfg.schedule_file.string());
    if (!cfg.model_file.empty()) {
      sc.model = predictor::load_model(cfg.model_file.string());
      sc.has_model = true;
    }
    return sc;
  }

  static Scenario load_file(const std::string& path) {
    return load(ScenarioConfig::from_file(path));
  }
};

// ---------------------------------------------------------------------------
// Run log
// ---------------------------------------------------------------------------

inline const std::vector<std::string> kRunLogHeader = {
    "t_s",          "t_ref_c",      "t_rule_c",    "t_room_up_c", "t_room_mid_c",
    "t_room_low_c", "q_hvac_up_w",  "q_hvac_mid_w", "q_hvac_low_w", "q_fw_up_w",
    "q_fw_mid_w",   "q_fw_low_w",   "t_amb_c",     "q_top_wm2",   "q_side_wm2",
    "occupancy_pct", "speed_ms",    "hvac_state",  "ddpc_status"};

struct RunLog {
  double dt_s = 0.0;

  struct Row {
    double t = 0.0;
    double t_ref = 0.0;   // applied setpoint over [t, t+dt)
    double t_rule = 0.0;  // rule-curve value at t
    Vec3 t_room = Vec3::Zero();
    Vec3 q_hvac = Vec3::Zero();
    Vec3 q_fw = Vec3::Zero();
    Vec5 d = Vec5::Zero();  // [t_amb, q_top, q_side, occupancy, speed]
    hvac::State state = hvac::State::Heating;
    std::string ddpc_status = "rule";
  };

  // Rows at t = 0, dt, ..., duration (inclusive). The terminal row repeats
  // the final applied inputs with the final temperatures so trapezoid
  // integrals of piecewise-constant powers are exact.
  std::vector<Row> rows;
  double energy_kwh = 0.0;

  void validate_uniform() const {
    if (rows.size() < 2) throw std::runtime_error("harness: run log needs at least two rows");
    for (std::size_t i = 1; i < rows.size(); ++i) {
      if (std::abs(rows[i].t - rows[i - 1].t - dt_s) > 1e-9) {
        throw std::runtime_error("harness: run log timestamps are not uniform");
      }
    }
  }

  double duration_s() const { return rows.empty() ? 0.0 : rows.back().t - rows.front().t; }
};

inline void write_runlog_csv(const RunLog& log, const std::string& path) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(log.rows.size());
  for (const auto& r : log.rows) {
    std::vector<std::string> out;
    out.reserve(kRunLogHeader.size());
    out.push_back(csv::format_double(r.t));
    out.push_back(csv::format_double(r.t_ref));
    out.push_back(csv::format_double(r.t_rule));
    for (int i = 0; i < 3; ++i) out.push_back(csv::format_double(r.t_room[i]));
    for (int i = 0; i < 3; ++i) out.push_back(csv::format_double(r.q_hvac[i]));
    for (int i = 0; i < 3; ++i) out.push_back(csv::format_double(r.q_fw[i]));
    for (int i = 0; i < 5; ++i) out.push_back(csv::format_double(r.d[i]));
    out.push_back(hvac::to_string(r.state));
    out.push_back(r.ddpc_status);
    rows.push_back(std::move(out));
  }
  csv::write_csv(path, kRunLogHeader, rows);
}

inline RunLog load_runlog_csv(const std::string& path) {
  csv::Table t = csv::read_csv(path);
  pipeline::require_header(t, kRunLogHeader);
  RunLog log;
  log.rows.reserve(t.rows.size());
  for (const auto& r : t.rows) {
    RunLog::Row row;
    row.t = csv::to_double(r[0], "t_s");
    row.t_ref = csv::to_double(r[1], "t_ref_c");
    row.t_rule = csv::to_double(r[2], "t_rule_c");
    for (int i = 0; i < 3; ++i) row.t_room[i] = csv::to_double(r[3 + i], "t_room");
    for (int i = 0; i < 3; ++i) row.q_hvac[i] = csv::to_double(r[6 + i], "q_hvac");
    for (int i = 0; i < 3; ++i) row.q_fw[i] = csv::to_double(r[9 + i], "q_fw");
    for (int i = 0; i < 5; ++i) row.d[i] = csv::to_double(r[12 + i], "d");
    row.state = hvac::state_from_string(r[17]);
    row.ddpc_status = r[18];
    log.rows.push_back(std::move(row));
  }
  if (log.rows.size() >= 2) log.dt_s = log.rows[1].t - log.rows[0].t;
  log.validate_uniform();
  return log;
}

// Pinned per-solve controller log format.
inline const std::vector<std::string> kControllerLogHeader = {
    "t", "u_star", "t_rule", "t_opt0", "eps_max", "objective", "status", "solve_ms"};

inline void write_controller_log_csv(const std::vector<ddpc::Controller::StepRecord>& records,
                                     const std::string& path) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(records.size());
  for (const auto& r : records) {
    std::string status = r.warmup ? "warmup" : (r.fallback ? "fallback" : qp::to_string(r.status));
    rows.push_back({csv::format_double(r.t), csv::format_double(r.u_star),
                    csv::format_double(r.t_rule), csv::format_double(r.t_opt0),
                    csv::format_double(r.eps_max), csv::format_double(r.objective), status,
                    csv::format_double(r.solve_ms)});
  }
  csv::write_csv(path, kControllerLogHeader, rows);
}

// ---------------------------------------------------------------------------
// Closed-loop run
// ---------------------------------------------------------------------------

struct RunResult {
  RunLog log;
  std::vector<ddpc::Controller::StepRecord> controller_log;  // empty for deactivated
};

// Surrogate electrical power of one log row: heating (air-side positive part
// plus floor/wall circuits) at efficiency eta, cooling (air-side negative
// part) at the given COP.
inline double electrical_power_w(const RunLog::Row& r, double cop, double eta_heat) {
  double p = 0.0;
  for (int d = 0; d < 3; ++d) {
    p += (std::max(r.q_hvac[d], 0.0) + r.q_fw[d]) / eta_heat;
    p += std::max(-r.q_hvac[d], 0.0) / cop;
  }
  return p;
}

// Runs the coach + HVAC stack for the scenario's duration. In activated mode
// the setpoint comes from the predictive optimizer every control period; in
// deactivated mode it follows the ambient rule curve (optionally dithered for
// identification runs). Measurement noise perturbs only what the optimizer
// sees, never the logged plant state.
inline RunResult run_closed_loop(const Scenario& sc, RunMode mode) {
  sc.config.validate();
  sc.thermal.validate();
  sc.distribution.validate();
  sc.hvac_cfg.validate();
  const ScenarioConfig& cfg = sc.config;

  if (mode == RunMode::Activated && !sc.has_model) {
    throw std::runtime_error("harness: activated run requires a predictor model");
  }

  const long steps = std::lround(cfg.duration_s / cfg.dt_s);
  const long control_every = std::lround(cfg.control_period_s / cfg.dt_s);

  RunResult res;
  res.log.dt_s = cfg.dt_s;
  res.log.rows.reserve(static_cast<std::size_t>(steps) + 1);

  coach::CoachState state;
  state.t_room = cfg.init_t_room;
  state.t_inv = cfg.init_t_inv;
  state.t_chassis = cfg.init_t_chassis;

  hvac::HvacController hc(sc.hvac_cfg);

  std::optional<ddpc::Controller> dc;
  if (mode == RunMode::Activated) {
    ddpc::Controller::Dependencies deps;
    deps.model = sc.model;
    deps.cfg = sc.ddpc_cfg;
    deps.rule = sc.hvac_cfg.rule;
    deps.sim_params = sc.thermal;
    deps.distribution = sc.distribution;
    deps.vent.vent_coeff = sc.hvac_cfg.vent_coeff;
    deps.vent.substate = sc.hvac_cfg.substate;
    deps.control_period_s = cfg.control_period_s;
    deps.sim_dt_s = cfg.dt_s;
    if (cfg.duration_s < sc.ddpc_cfg.rho * cfg.control_period_s) {
      throw std::runtime_error("harness: duration shorter than the optimizer warm-up window");
    }
    dc.emplace(std::move(deps));
  }

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> noise(0.0, cfg.noise_sigma);
  std::uniform_real_distribution<double> dither(-cfg.excitation_amplitude,
                                                cfg.excitation_amplitude);

  auto forecast = [&sc](double t) { return sc.schedule.at(t); };

  double t_ref = 0.0;
  std::string ddpc_status = "rule";
  RunLog::Row last_row;

  for (long k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * cfg.dt_s;
    const coach::DisturbanceSample d = sc.schedule.at(t);
    const double t_rule = hvac::rule_based_setpoint(d.t_amb_c, sc.hvac_cfg.rule);

    try {
      if (k % control_every == 0) {
        if (mode == RunMode::Activated) {
          Vec3 y_meas = state.t_room;
          if (cfg.noise_sigma > 0.0) {
            for (int i = 0; i < 3; ++i) y_meas[i] += noise(rng);
          }
          t_ref = dc->step(t, y_meas, d, forecast);
          const auto& rec = dc->log().back();
          ddpc_status =
              rec.warmup ? "warmup" : (rec.fallback ? "fallback" : qp::to_string(rec.status));
        } else {
          t_ref = t_rule;
          if (cfg.excitation_amplitude > 0.0) t_ref += dither(rng);
          ddpc_status = "rule";
        }
      }

      hvac::ControlOutput out = hc.update(t_ref, state.t_room, d.t_amb_c, d.occupancy_pct,
                                          cfg.dt_s);

      RunLog::Row row;
      row.t = t;
      row.t_ref = t_ref;
      row.t_rule = t_rule;
      row.t_room = state.t_room;
      row.q_hvac = out.q_hvac;
      row.q_fw = out.q_fw;
      row.d = ddpc::disturbance_vector(d);
      row.state = out.state;
      row.ddpc_status = ddpc_status;
      res.log.rows.push_back(row);
      last_row = row;

      Vec6 q_in;
      q_in << out.q_hvac + out.q_vent, out.q_fw;
      state = coach::step(state, q_in, d, cfg.dt_s, sc.thermal, sc.distribution);
    } catch (const std::exception& e) {
      throw std::runtime_error("harness: aborted at t = " + csv::format_double(t) + " s: " +
                               e.what());
    }
  }

  // Terminal row: final temperatures under the last applied inputs.
  {
    const double t_end = static_cast<double>(steps) * cfg.dt_s;
    const coach::DisturbanceSample d = sc.schedule.at(t_end);
    RunLog::Row row = last_row;
    row.t = t_end;
    row.t_rule = hvac::rule_based_setpoint(d.t_amb_c, sc.hvac_cfg.rule);
    row.t_room = state.t_room;
    row.d = ddpc::disturbance_vector(d);
    res.log.rows.push_back(row);
  }

  if (dc) res.controller_log = dc->log();
  res.log.energy_kwh = 0.0;  // filled below by energy_account
  return res;
}

// ---------------------------------------------------------------------------
// Energy accounting
// ---------------------------------------------------------------------------

// Trapezoid integral of the surrogate electrical power series, in kWh.
inline double energy_account(const RunLog& log, double cop, double eta_heat = 1.0) {
  if (!(cop > 0.0)) throw std::runtime_error("harness: cop must be > 0");
  if (!(eta_heat > 0.0)) throw std::runtime_error("harness: eta_heat must be > 0");
  log.validate_uniform();
  double joules = 0.0;
  for (std::size_t i = 1; i < log.rows.size(); ++i) {
    double p0 = electrical_power_w(log.rows[i - 1], cop, eta_heat);
    double p1 = electrical_power_w(log.rows[i], cop, eta_heat);
    joules += 0.5 * (p0 + p1) * log.dt_s;
  }
  return joules / 3.6e6;
}

// Cumulative energy per row (kWh), same trapezoid rule.
inline std::vector<double> cumulative_energy_kwh(const RunLog& log, double cop,
                                                 double eta_heat = 1.0) {
  log.validate_uniform();
  std::vector<double> out(log.rows.size(), 0.0);
  double joules = 0.0;
  for (std::size_t i = 1; i < log.rows.size(); ++i) {
    double p0 = electrical_power_w(log.rows[i - 1], cop, eta_heat);
    double p1 = electrical_power_w(log.rows[i], cop, eta_heat);
    joules += 0.5 * (p0 + p1) * log.dt_s;
    out[i] = joules / 3.6e6;
  }
  return out;
}

// ---------------------------------------------------------------------------
// A/B comparison
// ---------------------------------------------------------------------------

struct CompareBucket {
  double t0 = 0.0;
  double t1 = 0.0;
  double energy_a_kwh = 0.0;
  double energy_b_kwh = 0.0;
  double savings_pct = 0.0;
};

struct CompareReport {
  double steady_start_s = 0.0;
  double end_s = 0.0;
  double energy_a_kwh = 0.0;   // activated (candidate)
  double energy_b_kwh = 0.0;   // deactivated (baseline)
  double savings_pct = 0.0;    // 100 (E_b - E_a) / E_b
  double violation_a_k = 0.0;  // average hourly comfort violation
  double violation_b_k = 0.0;
  std::vector<CompareBucket> buckets;  // 30-minute savings buckets
};

namespace detail {

// Trapezoid integral of electrical power over row index range [i0, i1].
inline double window_energy_kwh(const RunLog& log, std::size_t i0, std::size_t i1, double cop,
                                double eta_heat) {
  double joules = 0.0;
  for (std::size_t i = i0 + 1; i <= i1; ++i) {
    double p0 = electrical_power_w(log.rows[i - 1], cop, eta_heat);
    double p1 = electrical_power_w(log.rows[i], cop, eta_heat);
    joules += 0.5 * (p0 + p1) * log.dt_s;
  }
  return joules / 3.6e6;
}

// Deck-averaged comfort-band exceedance (K) of one row.
inline double exceedance_k(const RunLog::Row& r, double t_max) {
  double v = 0.0;
  for (int d = 0; d < 3; ++d) {
    v += std::max(0.0, std::abs(r.t_room[d] - r.t_rule) - t_max);
  }
  return v / 3.0;
}

inline double window_violation_k(const RunLog& log, std::size_t i0, std::size_t i1,
                                 double t_max) {
  double integral_ks = 0.0;  // K * s
  for (std::size_t i = i0 + 1; i <= i1; ++i) {
    integral_ks +=
        0.5 * (exceedance_k(log.rows[i - 1], t_max) + exceedance_k(log.rows[i], t_max)) *
        log.dt_s;
  }
  double hours = static_cast<double>(i1 - i0) * log.dt_s / 3600.0;
  return hours > 0.0 ? (integral_ks / 3600.0) / hours : 0.0;
}

}  // namespace detail

// Compares two runs on a common grid over [steady_start, end]: surrogate
// energy savings of `a` relative to baseline `b`, average hourly comfort
// violations, and 30-minute savings buckets for bar charts.
inline CompareReport compare(const RunLog& a, const RunLog& b, double steady_start_s,
                             double t_max, double cop, double eta_heat = 1.0) {
  a.validate_uniform();
  b.validate_uniform();
  if (a.rows.size() != b.rows.size() || std::abs(a.dt_s - b.dt_s) > 1e-9) {
    throw std::runtime_error("harness: compare requires runs on a common grid");
  }
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    if (std::abs(a.rows[i].t - b.rows[i].t) > 1e-9) {
      throw std::runtime_error("harness: compare requires matching timestamps");
    }
  }
  const double t_end = a.rows.back().t;
  if (!(steady_start_s >= a.rows.front().t) || !(steady_start_s < t_end)) {
    throw std::runtime_error("harness: steady-state start lies outside the run");
  }

  // First row at or after the steady-state start.
  std::size_t i0 = 0;
  while (i0 < a.rows.size() && a.rows[i0].t < steady_start_s - 1e-9) ++i0;
  const std::size_t i1 = a.rows.size() - 1;

  CompareReport rep;
  rep.steady_start_s = a.rows[i0].t;
  rep.end_s = t_end;
  rep.energy_a_kwh = detail::window_energy_kwh(a, i0, i1, cop, eta_heat);
  rep.energy_b_kwh = detail::window_energy_kwh(b, i0, i1, cop, eta_heat);
  rep.savings_pct = rep.energy_b_kwh != 0.0
                        ? 100.0 * (rep.energy_b_kwh - rep.energy_a_kwh) / rep.energy_b_kwh
                        : 0.0;
  rep.violation_a_k = detail::window_violation_k(a, i0, i1, t_max);
  rep.violation_b_k = detail::window_violation_k(b, i0, i1, t_max);

  const double bucket_s = 30.0 * 60.0;
  const long rows_per_bucket = std::lround(bucket_s / a.dt_s);
  for (std::size_t s = i0; s < i1; s += static_cast<std::size_t>(rows_per_bucket)) {
    std::size_t e = std::min(i1, s + static_cast<std::size_t>(rows_per_bucket));
    CompareBucket bk;
    bk.t0 = a.rows[s].t;
    bk.t1 = a.rows[e].t;
    bk.energy_a_kwh = detail::window_energy_kwh(a, s, e, cop, eta_heat);
    bk.energy_b_kwh = detail::window_energy_kwh(b, s, e, cop, eta_heat);
    bk.savings_pct = bk.energy_b_kwh != 0.0
                         ? 100.0 * (bk.energy_b_kwh - bk.energy_a_kwh) / bk.energy_b_kwh
                         : 0.0;
    rep.buckets.push_back(bk);
  }
  return rep;
}

inline void write_compare_csv(const CompareReport& rep, const std::string& path) {
  std::vector<std::string> header = {"t0_s", "t1_s", "energy_activated_kwh",
                                     "energy_baseline_kwh", "savings_pct"};
  std::vector<std::vector<std::string>> rows;
  rows.push_back({csv::format_double(rep.steady_start_s), csv::format_double(rep.end_s),
                  csv::format_double(rep.energy_a_kwh), csv::format_double(rep.energy_b_kwh),
                  csv::format_double(rep.savings_pct)});
  for (const auto& b : rep.buckets) {
    rows.push_back({csv::format_double(b.t0), csv::format_double(b.t1),
                    csv::format_double(b.energy_a_kwh), csv::format_double(b.energy_b_kwh),
                    csv::format_double(b.savings_pct)});
  }
  csv::write_csv(path, header, rows);
}

// ---------------------------------------------------------------------------
// Report emission
// ---------------------------------------------------------------------------

// Writes per-run CSV logs, the comparison CSV, and a multi-panel SVG
// (temperatures with comfort bands, setpoints, disturbances, cumulative
// surrogate energy, per-bucket savings bars). Energies are surrogate
// electrical values, not metered hardware consumption.
inline void emit_report(const std::string& out_dir, const std::string& name, const RunLog& act,
                        const RunLog& deact, const CompareReport& rep, double t_max, double cop,
                        double eta_heat = 1.0) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (!fs::is_directory(out_dir)) {
    throw std::runtime_error("harness: cannot create report directory " + out_dir);
  }
  const fs::path dir(out_dir);
  write_runlog_csv(act, (dir / (name + "_activated.csv")).string());
  write_runlog_csv(deact, (dir / (name + "_deactivated.csv")).string());
  write_compare_csv(rep, (dir / (name + "_comparison.csv")).string());

  auto hours = [](const RunLog& log) {
    std::vector<double> h;
    h.reserve(log.rows.size());
    for (const auto& r : log.rows) h.push_back(r.t / 3600.0);
    return h;
  };
  auto channel = [](const RunLog& log, auto&& get) {
    std::vector<double> v;
    v.reserve(log.rows.size());
    for (const auto& r : log.rows) v.push_back(get(r));
    return v;
  };

  std::vector<plot::Panel> panels;
  const std::vector<double> h_act = hours(act);

  {
    plot::Panel p;
    p.title = name + ": room temperatures (activated) and comfort band";
    p.x_label = "time (h)";
    p.y_label = "deg C";
    for (std::size_t i = 1; i < act.rows.size(); ++i) {
      plot::Band band;
      band.x0 = act.rows[i - 1].t / 3600.0;
      band.x1 = act.rows[i].t / 3600.0;
      band.y0 = act.rows[i - 1].t_rule - t_max;
      band.y1 = act.rows[i - 1].t_rule + t_max;
      // Merge identical consecutive bands to keep the SVG small.
      if (!p.bands.empty() && p.bands.back().y0 == band.y0 && p.bands.back().y1 == band.y1) {
        p.bands.back().x1 = band.x1;
      } else {
        p.bands.push_back(band);
      }
    }
    const char* deck[3] = {"up", "mid", "low"};
    for (int d = 0; d < 3; ++d) {
      p.series.push_back({std::string("room ") + deck[d], h_act,
                          channel(act, [d](const RunLog::Row& r) { return r.t_room[d]; }), "",
                          false, 1.3});
    }
    p.series.push_back({"setpoint", h_act,
                        channel(act, [](const RunLog::Row& r) { return r.t_ref; }), "#000000",
                        true, 1.1});
    panels.push_back(std::move(p));
  }
  {
    plot::Panel p;
    p.title = name + ": setpoints";
    p.x_label = "time (h)";
    p.y_label = "deg C";
    p.series.push_back({"activated", h_act,
                        channel(act, [](const RunLog::Row& r) { return r.t_ref; }), "", true});
    p.series.push_back({"baseline", hours(deact),
                        channel(deact, [](const RunLog::Row& r) { return r.t_ref; }), "", true});
    p.series.push_back({"rule", h_act,
                        channel(act, [](const RunLog::Row& r) { return r.t_rule; }), "#808080",
                        true, 1.0});
    panels.push_back(std::move(p));
  }
  {
    plot::Panel p;
    p.title = name + ": disturbances";
    p.x_label = "time (h)";
    p.y_label = "mixed units";
    p.series.push_back({"t_amb (degC)", h_act,
                        channel(act, [](const RunLog::Row& r) { return r.d[0]; })});
    p.series.push_back({"roof sun (x0.01 W/m2)", h_act,
                        channel(act, [](const RunLog::Row& r) { return 0.01 * r.d[1]; })});
    p.series.push_back({"occupancy (x10)", h_act,
                        channel(act, [](const RunLog::Row& r) { return 10.0 * r.d[3]; })});
    p.series.push_back({"speed (m/s)", h_act,
                        channel(act, [](const RunLog::Row& r) { return r.d[4]; })});
    panels.push_back(std::move(p));
  }
  {
    plot::Panel p;
    p.title = name + ": cumulative surrogate electrical energy";
    p.x_label = "time (h)";
    p.y_label = "kWh";
    p.series.push_back({"activated", h_act, cumulative_energy_kwh(act, cop, eta_heat)});
    p.series.push_back({"baseline", hours(deact), cumulative_energy_kwh(deact, cop, eta_heat)});
    panels.push_back(std::move(p));
  }
  if (!rep.buckets.empty()) {
    plot::Panel p;
    p.title = name + ": 30-minute energy buckets (steady-state window)";
    p.x_label = "bucket start (h)";
    p.y_label = "kWh";
    p.bars.label_a = "activated";
    p.bars.label_b = "baseline";
    for (const auto& b : rep.buckets) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.1f", b.t0 / 3600.0);
      p.bars.labels.push_back(buf);
      p.bars.a.push_back(b.energy_a_kwh);
      p.bars.b.push_back(b.energy_b_kwh);
    }
    panels.push_back(std::move(p));
  }
  plot::write_svg((dir / (name + "_report.svg")).string(), panels);
}

// ---------------------------------------------------------------------------
// Identification helpers
// ---------------------------------------------------------------------------

// Samples a run log onto the control-period grid as one trajectory. Each
// period contributes the values at its start instant: the setpoint applied
// from that moment, the room temperatures the controller would measure
// before it acts, and the concurrent disturbances. This matches the rolling
// history a live controller accumulates, and it keeps the data strictly
// causal: period k's output cannot contain any response to period k's input.
// (Averaging over the period would leak the within-period response into the
// same sample and alias the input's effect.) The terminal log row belongs to
// no period and is ignored.
inline pipeline::Trajectory trajectory_from_runlog(const RunLog& log, double period_s,
                                                   int id = 0) {
  log.validate_uniform();
  if (!(period_s > 0.0)) throw std::runtime_error("harness: period must be > 0");
  const long per = std::lround(period_s / log.dt_s);
  if (per < 1 || std::abs(per * log.dt_s - period_s) > 1e-9) {
    throw std::runtime_error("harness: period must be a multiple of the log step");
  }
  const long n_rows = static_cast<long>(log.rows.size()) - 1;  // exclude terminal row
  const long n_bins = n_rows / per;
  pipeline::Trajectory tr;
  tr.id = id;
  tr.period_s = period_s;
  tr.u.reserve(static_cast<std::size_t>(n_bins));
  for (long k = 0; k < n_bins; ++k) {
    const RunLog::Row& r = log.rows[static_cast<std::size_t>(k * per)];
    tr.u.push_back(r.t_ref);
    tr.y.push_back(r.t_room);
    tr.d.push_back(r.d);
  }
  tr.validate();
  return tr;
}

// Adds iid Gaussian measurement noise to the output channel of a trajectory
// (models sensor noise on the aggregated data a predictor is fitted to).
inline pipeline::Trajectory add_measurement_noise(const pipeline::Trajectory& tr, double sigma,
                                                  std::uint64_t seed) {
  pipeline::Trajectory out = tr;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, sigma);
  for (auto& y : out.y) {
    for (int i = 0; i < 3; ++i) y[i] += n(rng);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic day schedules (deterministic, desk-scale)
// ---------------------------------------------------------------------------

namespace detail {

inline double day_bell(double t_s, double start_h, double end_h) {
  double h = t_s / 3600.0;
  if (h <= start_h || h >= end_h) return 0.0;
  return std::sin(kPi * (h - start_h) / (end_h - start_h));
}

}  // namespace detail

// A cold overcast winter day: strong heating demand, weak diffuse light,
// commuter peaks.
inline DisturbanceSchedule make_cold_day(double sample_period_s = 300.0,
                                         double duration_s = 86400.0) {
  DisturbanceSchedule out;
  for (double t = 0.0; t <= duration_s + 1e-9; t += sample_period_s) {
    coach::DisturbanceSample d;
    double h = std::fmod(t, 86400.0) / 3600.0;
    d.t_amb_c = -6.0 + 4.0 * std::cos(2.0 * kPi * (h - 15.0) / 24.0);
    double bell = detail::day_bell(std::fmod(t, 86400.0), 7.5, 16.5);
    d.q_g_w_per_m2 = 80.0 * bell;  // overcast sky: diffuse light only
    d.alpha_rad = 0.25 * bell;
    d.beta_rad = kPi * (0.5 + (h - 7.5) / 9.0 * 0.9);
    d.theta_rad = 0.9;
    if (h < 5.0 || h >= 23.0) {
      d.occupancy_pct = 0.0;
    } else if ((h >= 6.5 && h < 9.0) || (h >= 16.5 && h < 19.0)) {
      d.occupancy_pct = 0.55;
    } else {
      d.occupancy_pct = 0.2;
    }
    bool stop = std::fmod(t, 3600.0) == 1800.0 && h >= 5.0 && h < 23.0;
    d.speed_ms = stop ? 0.0 : 26.0;
    d.door_open = stop;
    out.time_s.push_back(t);
    out.samples.push_back(d);
  }
  out.validate();
  return out;
}

// A hot summer day: cooling demand, strong sun, warm track bed.
inline DisturbanceSchedule make_hot_day(double sample_period_s = 300.0,
                                        double duration_s = 86400.0) {
  DisturbanceSchedule out;
  for (double t = 0.0; t <= duration_s + 1e-9; t += sample_period_s) {
    coach::DisturbanceSample d;
    double h = std::fmod(t, 86400.0) / 3600.0;
    d.t_amb_c = 28.0 + 5.0 * std::cos(2.0 * kPi * (h - 15.0) / 24.0);
    double bell = detail::day_bell(std::fmod(t, 86400.0), 6.0, 20.0);
    d.q_g_w_per_m2 = 800.0 * bell;
    d.alpha_rad = 1.1 * bell;
    d.beta_rad = kPi * (0.5 + (h - 6.0) / 14.0 * 0.9);
    d.theta_rad = 0.9;
    if (h < 5.0 || h >= 23.0) {
      d.occupancy_pct = 0.0;
    } else if ((h >= 7.0 && h < 9.5) || (h >= 16.5 && h < 19.5)) {
      d.occupancy_pct = 0.5;
    } else {
      d.occupancy_pct = 0.25;
    }
    bool stop = std::fmod(t, 3600.0) == 1800.0 && h >= 5.0 && h < 23.0;
    d.speed_ms = stop ? 0.0 : 26.0;
    d.door_open = stop;
    out.time_s.push_back(t);
    out.samples.push_back(d);
  }
  out.validate();
  return out;
}

// An early-spring day: cold night and morning, strong midday sun pushing the
// coach toward overheating, cool evening.
inline DisturbanceSchedule make_march_day(double sample_period_s = 300.0,
                                          double duration_s = 86400.0) {
  DisturbanceSchedule out;
  for (double t = 0.0; t <= duration_s + 1e-9; t += sample_period_s) {
    coach::DisturbanceSample d;
    double h = std::fmod(t, 86400.0) / 3600.0;
    d.t_amb_c = 4.0 + 8.0 * std::cos(2.0 * kPi * (h - 13.5) / 24.0);
    double bell = detail::day_bell(std::fmod(t, 86400.0), 7.0, 17.0);
    d.q_g_w_per_m2 = 750.0 * bell;
    d.alpha_rad = 0.85 * bell;
    d.beta_rad = kPi * (0.5 + (h - 7.0) / 10.0 * 0.9);
    d.theta_rad = 0.9;
    if (h < 5.0 || h >= 23.0) {
      d.occupancy_pct = 0.05;
    } else if ((h >= 6.5 && h < 9.0) || (h >= 16.5 && h < 19.0)) {
      d.occupancy_pct = 0.45;  // commuter peaks
    } else if (h >= 19.0) {
      d.occupancy_pct = 0.1;  // sparse evening service
    } else {
      d.occupancy_pct = 0.2;
    }
    d.speed_ms = (h >= 5.0 && h < 23.0) ? 24.0 : 0.0;
    d.door_open = false;
    out.time_s.push_back(t);
    out.samples.push_back(d);
  }
  out.validate();
  return out;
}

// Several synthetic days with randomized weather/occupancy levels; used to
// generate identification data with wide coverage. Deterministic per seed.
// Ambient level and peak irradiance are stratified across the days (one day
// per stratum, independently shuffled) so even a short campaign spans the
// cold/overcast-to-hot/sunny range instead of relying on lucky draws.
inline DisturbanceSchedule make_training_days(int n_days, std::uint64_t seed,
                                              double sample_period_s = 300.0) {
  if (n_days < 1) throw std::runtime_error("harness: need at least one training day");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::vector<int> base_stratum(static_cast<std::size_t>(n_days));
  std::vector<int> sun_stratum(static_cast<std::size_t>(n_days));
  std::iota(base_stratum.begin(), base_stratum.end(), 0);
  std::iota(sun_stratum.begin(), sun_stratum.end(), 0);
  std::shuffle(base_stratum.begin(), base_stratum.end(), rng);
  std::shuffle(sun_stratum.begin(), sun_stratum.end(), rng);
  DisturbanceSchedule out;
  for (int day = 0; day < n_days; ++day) {
    const double bs = (base_stratum[static_cast<std::size_t>(day)] + u01(rng)) / n_days;
    const double ss = (sun_stratum[static_cast<std::size_t>(day)] + u01(rng)) / n_days;
    double base = -10.0 + 40.0 * bs;  // day mean ambient in [-10, 30]
    double amp = 3.0 + 4.0 * u01(rng);  // diurnal swing
    double sun = 50.0 + 800.0 * ss;     // peak irradiance
    double occ_hi = 0.2 + 0.6 * u01(rng);
    for (double tt = 0.0; tt < 86400.0 - 1e-9; tt += sample_period_s) {
      double t = day * 86400.0 + tt;
      double h = tt / 3600.0;
      coach::DisturbanceSample d;
      d.t_amb_c = base + amp * std::cos(2.0 * kPi * (h - 15.0) / 24.0);
      double bell = detail::day_bell(tt, 7.0, 17.0);
      d.q_g_w_per_m2 = sun * bell;
      d.alpha_rad = 0.9 * bell;
      d.beta_rad = kPi * (0.5 + h / 24.0);
      d.theta_rad = 0.9;
      // 90-minute occupancy blocks alternating between quiet and busy.
      bool busy = std::fmod(h, 3.0) >= 1.5;
      d.occupancy_pct = (h < 5.0 || h >= 23.0) ? 0.0 : (busy ? occ_hi : 0.1);
      bool stop = std::fmod(tt, 3600.0) == 1800.0 && h >= 5.0 && h < 23.0;
      d.speed_ms = stop ? 0.0 : 25.0;
      d.door_open = stop;
      out.time_s.push_back(t);
      out.samples.push_back(d);
    }
  }
  // Terminal sample to cover the last instant.
  coach::DisturbanceSample d = out.samples.back();
  out.time_s.push_back(n_days * 86400.0);
  out.samples.push_back(d);
  out.validate();
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic raw-record generation (pipeline round-trip source)
// ---------------------------------------------------------------------------

// Emits raw CSV-shaped records that ingest back into exactly `tr` when the
// HVAC/weather cadences match the trajectory period: one HVAC and one weather
// record per period (so bin means reproduce the samples), a stationary
// position (heading stays 0), and solar geometry chosen to invert the
// roof/side projection: q_g = hypot(q_top, q_side), alpha = atan2(q_side,
// q_top), beta = pi/2, theta = 0. Occupancy becomes trip intervals aligned to
// period boundaries. `t0_epoch` must be a multiple of the period so the
// resampling grid aligns with the records.
inline pipeline::RawRecordSet synth_raw_records(const pipeline::Trajectory& tr,
                                                std::int64_t t0_epoch) {
  tr.validate();
  const std::int64_t p = static_cast<std::int64_t>(tr.period_s);
  if (static_cast<double>(p) != tr.period_s || p <= 0) {
    throw std::runtime_error("harness: trajectory period must be a whole number of seconds");
  }
  if (t0_epoch % p != 0) {
    throw std::runtime_error("harness: epoch start must be a multiple of the period");
  }
  pipeline::RawRecordSet raw;
  for (int k = 0; k < tr.length(); ++k) {
    const std::int64_t ts = t0_epoch + static_cast<std::int64_t>(k) * p;
    pipeline::HvacRecord h;
    h.ts = ts;
    h.mode = hvac::Mode::Regular;
    h.t_ref_c = tr.u[static_cast<std::size_t>(k)];
    h.t_room_c = tr.y[static_cast<std::size_t>(k)];
    h.speed_ms = tr.d[static_cast<std::size_t>(k)][4];
    raw.hvac.push_back(h);

    const Vec5& d = tr.d[static_cast<std::size_t>(k)];
    pipeline::WeatherRecord w;
    w.ts = ts;
    w.lat_deg = 47.3769;
    w.lon_deg = 8.5417;
    w.t_amb_c = d[0];
    w.q_g_w_per_m2 = std::hypot(d[1], d[2]);
    w.alpha_rad = (w.q_g_w_per_m2 > 0.0) ? std::atan2(d[2], d[1]) : 0.0;
    w.beta_rad = kPi / 2.0;
    raw.weather.push_back(w);
  }
  // Occupancy trips: maximal runs of equal non-zero occupancy.
  int k = 0;
  while (k < tr.length()) {
    double occ = tr.d[static_cast<std::size_t>(k)][3];
    int j = k;
    while (j < tr.length() && tr.d[static_cast<std::size_t>(j)][3] == occ) ++j;
    if (occ != 0.0) {
      pipeline::TripRecord trip;
      trip.start = t0_epoch + static_cast<std::int64_t>(k) * p;
      trip.end = t0_epoch + static_cast<std::int64_t>(j) * p;
      trip.occupancy_pct = occ;
      raw.trips.push_back(trip);
    }
    k = j;
  }
  raw.normalize();
  return raw;
}

}  // namespace railtherm::harness
