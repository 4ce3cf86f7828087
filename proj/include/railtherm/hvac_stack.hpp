#pragma once

// Supervisory HVAC control stack for the coach simulator: rule-based
// setpoint curve, mode/state/substate machines, per-deck PID with output,
// rate and anti-windup handling, and the floor/wall heating circuits.
//
// The stack consumes a reference temperature (from the rule table or from
// the predictive setpoint optimizer) and produces actuator heat flows for
// the coach model. All pieces are pure transition functions plus explicit
// memory structs passed in and out, so runs are deterministic and
// bit-reproducible; the HvacController class wires them together for
// closed-loop runs.

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "railtherm/config.hpp"
#include "railtherm/types.hpp"

namespace railtherm::hvac {

// ---------------------------------------------------------------------------
// Modes, states, substates
// ---------------------------------------------------------------------------

enum class Mode { Regular, Slumber, Off };

enum class State {
  Preheating,
  Precooling,
  Heating,
  Cooling,
  Mixed,
  ActiveHeating,
  ActiveVentilation,
  ActiveCooling,
  OffState,
};

enum class Air { Circulated, Outside, Mixed };

inline const char* to_string(Mode m) {
  switch (m) {
    case Mode::Regular: return "regular";
    case Mode::Slumber: return "slumber";
    case Mode::Off: return "off";
  }
  return "?";
}

inline const char* to_string(State s) {
  switch (s) {
    case State::Preheating: return "preheating";
    case State::Precooling: return "precooling";
    case State::Heating: return "heating";
    case State::Cooling: return "cooling";
    case State::Mixed: return "mixed";
    case State::ActiveHeating: return "active_heating";
    case State::ActiveVentilation: return "active_ventilation";
    case State::ActiveCooling: return "active_cooling";
    case State::OffState: return "off";
  }
  return "?";
}

inline const char* to_string(Air a) {
  switch (a) {
    case Air::Circulated: return "circulated";
    case Air::Outside: return "outside";
    case Air::Mixed: return "mixed";
  }
  return "?";
}

inline Mode mode_from_string(const std::string& s) {
  if (s == "regular") return Mode::Regular;
  if (s == "slumber") return Mode::Slumber;
  if (s == "off") return Mode::Off;
  throw std::runtime_error("hvac: unknown mode '" + s + "'");
}

inline State state_from_string(const std::string& s) {
  if (s == "preheating") return State::Preheating;
  if (s == "precooling") return State::Precooling;
  if (s == "heating") return State::Heating;
  if (s == "cooling") return State::Cooling;
  if (s == "mixed") return State::Mixed;
  if (s == "active_heating") return State::ActiveHeating;
  if (s == "active_ventilation") return State::ActiveVentilation;
  if (s == "active_cooling") return State::ActiveCooling;
  if (s == "off") return State::OffState;
  throw std::runtime_error("hvac: unknown state '" + s + "'");
}

// Which states each mode may occupy.
inline bool admissible(Mode mode, State state) {
  switch (mode) {
    case Mode::Regular:
      return state == State::Preheating || state == State::Precooling ||
             state == State::Heating || state == State::Cooling || state == State::Mixed;
    case Mode::Slumber:
      return state == State::ActiveHeating || state == State::ActiveVentilation ||
             state == State::ActiveCooling || state == State::OffState;
    case Mode::Off:
      return state == State::OffState;
  }
  return false;
}

inline bool is_heating_state(State s) {
  return s == State::Preheating || s == State::Heating || s == State::ActiveHeating;
}

inline bool is_cooling_state(State s) {
  return s == State::Precooling || s == State::Cooling || s == State::ActiveCooling;
}

// ---------------------------------------------------------------------------
// Rule-based setpoint curve
// ---------------------------------------------------------------------------

struct Knot {
  double x;
  double y;
};

inline void validate_knots(const std::vector<Knot>& knots, bool require_monotone_y,
                           const char* what) {
  if (knots.empty()) {
    throw std::runtime_error(std::string("hvac: ") + what + " table is empty");
  }
  for (std::size_t i = 1; i < knots.size(); ++i) {
    if (!(knots[i].x > knots[i - 1].x)) {
      throw std::runtime_error(std::string("hvac: ") + what +
                               " breakpoints must be strictly increasing");
    }
  }
  if (require_monotone_y) {
    for (std::size_t i = 1; i < knots.size(); ++i) {
      if (knots[i].y < knots[i - 1].y) {
        throw std::runtime_error(std::string("hvac: ") + what + " values must be non-decreasing");
      }
    }
  }
}

// Piecewise-linear interpolation through `knots`, clamped to the end values
// outside the breakpoint range.
inline double piecewise_linear(const std::vector<Knot>& knots, double x) {
  if (knots.empty()) throw std::runtime_error("hvac: interpolation table is empty");
  if (x <= knots.front().x) return knots.front().y;
  if (x >= knots.back().x) return knots.back().y;
  for (std::size_t i = 1; i < knots.size(); ++i) {
    if (x <= knots[i].x) {
      double w = (x - knots[i - 1].x) / (knots[i].x - knots[i - 1].x);
      return knots[i - 1].y + w * (knots[i].y - knots[i - 1].y);
    }
  }
  return knots.back().y;
}

// Ambient-compensated setpoint curve: warmer outside means a warmer comfort
// target. Non-decreasing by validation.
struct RuleTable {
  std::vector<Knot> knots;

  void validate() const { validate_knots(knots, /*require_monotone_y=*/true, "rule"); }

  double operator()(double t_amb) const {
    validate();
    return piecewise_linear(knots, t_amb);
  }

  static RuleTable defaults() {
    return RuleTable{{{-20.0, 20.0}, {5.0, 21.0}, {15.0, 22.0}, {25.0, 24.0}, {35.0, 26.0}}};
  }
};

inline double rule_based_setpoint(double t_amb, const RuleTable& table) {
  table.validate();
  return piecewise_linear(table.knots, t_amb);
}

// ---------------------------------------------------------------------------
// State machine
// ---------------------------------------------------------------------------

struct StateThresholds {
  double preheat_delta = 3.0;  // |mean error| beyond which pre-conditioning engages
  double hysteresis = 0.5;     // heating/cooling switchover band
  double mixed_spread = 1.0;   // per-deck disagreement for the mixed state
  double slumber_delta = 1.0;  // active heating/cooling band in slumber

  void validate() const {
    if (!(preheat_delta > 0.0) || !(hysteresis >= 0.0) || !(mixed_spread > 0.0) ||
        !(slumber_delta > 0.0)) {
      throw std::runtime_error("hvac: state thresholds must be positive");
    }
  }
};

// Deterministic state transition. `state` is the current state (assumed
// admissible for `mode`); the result is always admissible for `mode`.
inline State hvac_state_update(Mode mode, State state, const Vec3& t_room, double t_ref,
                               double /*t_amb*/, const StateThresholds& th = {}) {
  const Vec3 e = Vec3::Constant(t_ref) - t_room;
  const double e_mean = e.mean();

  switch (mode) {
    case Mode::Off:
      return State::OffState;

    case Mode::Slumber: {
      // Reduced service: keep the coach within a generous band.
      bool heating_now = state == State::ActiveHeating;
      bool cooling_now = state == State::ActiveCooling;
      double on = th.slumber_delta;
      double off = std::max(0.0, th.slumber_delta - th.hysteresis);
      if (e_mean > (heating_now ? off : on)) return State::ActiveHeating;
      if (e_mean < -(cooling_now ? off : on)) return State::ActiveCooling;
      return State::ActiveVentilation;
    }

    case Mode::Regular: {
      if (e_mean > th.preheat_delta) return State::Preheating;
      if (e_mean < -th.preheat_delta) return State::Precooling;
      if (e.maxCoeff() > th.mixed_spread && e.minCoeff() < -th.mixed_spread) {
        return State::Mixed;
      }
      // Plain heating/cooling with a hysteresis band so the state does not
      // chatter around zero mean error.
      if (state == State::Heating || state == State::Preheating) {
        return e_mean >= -th.hysteresis ? State::Heating : State::Cooling;
      }
      if (state == State::Cooling || state == State::Precooling) {
        return e_mean <= th.hysteresis ? State::Cooling : State::Heating;
      }
      // From Mixed or a carried-over foreign state: pick by sign.
      return e_mean >= 0.0 ? State::Heating : State::Cooling;
    }
  }
  return State::OffState;
}

// ---------------------------------------------------------------------------
// Substate (fresh-air fraction)
// ---------------------------------------------------------------------------

struct Substate {
  Air air = Air::Circulated;
  double outside_fraction = 0.0;  // in [0, 1]
};

struct SubstateRule {
  double circulated_below = 0.05;  // occupancy below which air is recirculated
  double outside_above = 0.95;     // occupancy above which air is fully fresh

  void validate() const {
    if (!(circulated_below >= 0.0 && circulated_below < outside_above && outside_above <= 1.0)) {
      throw std::runtime_error("hvac: substate thresholds must satisfy 0 <= lo < hi <= 1");
    }
  }
};

// Fresh-air fraction rises with occupancy (more people, more outside air);
// an off HVAC moves no air at all.
inline Substate hvac_substate_update(State state, const Vec3& /*t_room*/, double /*t_amb*/,
                                     double occupancy_pct, const SubstateRule& rule = {}) {
  if (state == State::OffState) return Substate{Air::Circulated, 0.0};
  double f = std::clamp(occupancy_pct, 0.0, 1.0);
  if (f < rule.circulated_below) return Substate{Air::Circulated, 0.0};
  if (f > rule.outside_above) return Substate{Air::Outside, 1.0};
  return Substate{Air::Mixed, f};
}

// ---------------------------------------------------------------------------
// Per-deck PID with limits, rate limiting and anti-windup
// ---------------------------------------------------------------------------

struct PidGains {
  Vec3 kp = Vec3::Constant(2000.0);         // W/K
  Vec3 ki = Vec3::Constant(2.0);            // W/(K s)
  Vec3 kd = Vec3::Zero();                   // W s/K
  Vec3 q_min = Vec3::Constant(-8000.0);     // W
  Vec3 q_max = Vec3::Constant(8000.0);      // W
  Vec3 rate_limit = Vec3::Constant(100.0);  // W/s
  // Back-calculation gain (1/s scale); NaN selects the default 1/kp.
  Vec3 aw_gain = Vec3::Constant(std::numeric_limits<double>::quiet_NaN());

  double anti_windup_gain(int deck) const {
    double aw = aw_gain[deck];
    if (std::isnan(aw)) return kp[deck] > 0.0 ? 1.0 / kp[deck] : 0.0;
    return aw;
  }

  void validate() const {
    for (int d = 0; d < 3; ++d) {
      if (!(kp[d] >= 0.0) || !(ki[d] >= 0.0) || !(kd[d] >= 0.0)) {
        throw std::runtime_error("hvac: PID gains must be >= 0");
      }
      if (!(q_min[d] <= 0.0 && 0.0 <= q_max[d])) {
        throw std::runtime_error("hvac: PID output limits must satisfy q_min <= 0 <= q_max");
      }
      if (!(rate_limit[d] > 0.0)) {
        throw std::runtime_error("hvac: PID rate limit must be > 0");
      }
      if (!std::isnan(aw_gain[d]) && !(aw_gain[d] >= 0.0)) {
        throw std::runtime_error("hvac: anti-windup gain must be >= 0");
      }
    }
  }
};

struct PidMemory {
  Vec3 integral = Vec3::Zero();     // K*s
  Vec3 prev_error = Vec3::Zero();   // K
  Vec3 prev_output = Vec3::Zero();  // W

  void reset() {
    integral.setZero();
    prev_error.setZero();
    prev_output.setZero();
  }
};

// Output range the current HVAC state allows: heating-only states cannot
// extract heat, cooling-only states cannot add it, ventilation/off produce
// nothing, and the mixed state may do either.
inline std::pair<double, double> state_output_limits(State state, double q_min, double q_max) {
  switch (state) {
    case State::Preheating:
    case State::Heating:
    case State::ActiveHeating:
      return {std::max(0.0, q_min), q_max};
    case State::Precooling:
    case State::Cooling:
    case State::ActiveCooling:
      return {q_min, std::min(0.0, q_max)};
    case State::Mixed:
      return {q_min, q_max};
    case State::ActiveVentilation:
    case State::OffState:
      return {0.0, 0.0};
  }
  return {0.0, 0.0};
}

// One PID update for all three decks. The integrator holds accumulated error
// (K*s); back-calculation feeds the saturation excess back so the integrator
// does not wind up while the output is clamped. Within a fixed state the
// previous output always lies inside the state limits, so clamping to the
// limits first and the rate window second satisfies both bounds at once.
inline std::pair<Vec3, PidMemory> pid_step(const PidGains& g, const PidMemory& mem, double t_ref,
                                           const Vec3& t_room, double dt, State limits_ctx) {
  if (!(dt > 0.0)) throw std::runtime_error("hvac: PID step size must be positive");
  Vec3 q_out;
  PidMemory next = mem;
  for (int d = 0; d < 3; ++d) {
    const double e = t_ref - t_room[d];
    const double dedt = (e - mem.prev_error[d]) / dt;
    const double u_cmd = g.kp[d] * e + g.ki[d] * mem.integral[d] + g.kd[d] * dedt;

    auto [lo, hi] = state_output_limits(limits_ctx, g.q_min[d], g.q_max[d]);
    double u = std::clamp(u_cmd, lo, hi);
    const double du = g.rate_limit[d] * dt;
    u = std::clamp(u, mem.prev_output[d] - du, mem.prev_output[d] + du);

    next.integral[d] = mem.integral[d] + dt * (e + g.anti_windup_gain(d) * (u - u_cmd));
    next.prev_error[d] = e;
    next.prev_output[d] = u;
    q_out[d] = u;
  }
  return {q_out, next};
}

// ---------------------------------------------------------------------------
// Floor/wall heating circuits
// ---------------------------------------------------------------------------

struct FloorWallTable {
  Vec3 max_w = Vec3(1200.0, 1200.0, 1800.0);  // per-deck circuit maxima
  // Fraction of the maximum as a function of ambient temperature; must be
  // non-increasing with values in [0, 1].
  std::vector<Knot> fraction_knots = {{-10.0, 1.0}, {5.0, 0.6}, {15.0, 0.0}};

  void validate() const {
    if (max_w.minCoeff() < 0.0) {
      throw std::runtime_error("hvac: floor/wall maxima must be >= 0");
    }
    validate_knots(fraction_knots, /*require_monotone_y=*/false, "floor/wall");
    for (std::size_t i = 0; i < fraction_knots.size(); ++i) {
      if (fraction_knots[i].y < 0.0 || fraction_knots[i].y > 1.0) {
        throw std::runtime_error("hvac: floor/wall fractions must lie in [0, 1]");
      }
      if (i > 0 && fraction_knots[i].y > fraction_knots[i - 1].y) {
        throw std::runtime_error("hvac: floor/wall fractions must be non-increasing");
      }
    }
  }
};

// Floor/wall circuits run at full power while preheating, taper with ambient
// temperature while heating, and stay off otherwise.
inline Vec3 floor_wall_heating(State state, double t_amb, const FloorWallTable& table) {
  table.validate();
  if (state == State::Preheating) return table.max_w;
  if (state == State::Heating) {
    return table.max_w * piecewise_linear(table.fraction_knots, t_amb);
  }
  return Vec3::Zero();
}

// ---------------------------------------------------------------------------
// Bundled configuration + a stateful convenience wrapper
// ---------------------------------------------------------------------------

struct HvacConfig {
  RuleTable rule = RuleTable::defaults();
  StateThresholds thresholds{};
  SubstateRule substate{};
  PidGains pid{};
  FloorWallTable fw{};
  double vent_coeff = 80.0;  // W/K per unit outside-air fraction, per deck

  void validate() const {
    rule.validate();
    thresholds.validate();
    substate.validate();
    pid.validate();
    fw.validate();
    if (!(vent_coeff >= 0.0)) throw std::runtime_error("hvac: vent coefficient must be >= 0");
  }

  static HvacConfig from_config(const cfg::KeyValueFile& kv) {
    HvacConfig c;
    if (kv.has("hvac.rule.t_amb") || kv.has("hvac.rule.t_set")) {
      auto xs = kv.numbers("hvac.rule.t_amb");
      auto ys = kv.numbers("hvac.rule.t_set");
      if (xs.size() != ys.size()) {
        throw std::runtime_error("hvac: rule table key lists differ in length");
      }
      c.rule.knots.clear();
      for (std::size_t i = 0; i < xs.size(); ++i) c.rule.knots.push_back({xs[i], ys[i]});
    }
    c.thresholds.preheat_delta =
        kv.number_or("hvac.thresholds.preheat_delta", c.thresholds.preheat_delta);
    c.thresholds.hysteresis = kv.number_or("hvac.thresholds.hysteresis", c.thresholds.hysteresis);
    c.thresholds.mixed_spread =
        kv.number_or("hvac.thresholds.mixed_spread", c.thresholds.mixed_spread);
    c.thresholds.slumber_delta =
        kv.number_or("hvac.thresholds.slumber_delta", c.thresholds.slumber_delta);
    c.substate.circulated_below =
        kv.number_or("hvac.substate.circulated_below", c.substate.circulated_below);
    c.substate.outside_above =
        kv.number_or("hvac.substate.outside_above", c.substate.outside_above);
    auto vec3_or = [&](const std::string& key, const Vec3& dflt) {
      if (!kv.has(key)) return dflt;
      auto v = kv.numbers_n(key, 3);
      return Vec3(v[0], v[1], v[2]);
    };
    c.pid.kp = vec3_or("hvac.pid.kp", c.pid.kp);
    c.pid.ki = vec3_or("hvac.pid.ki", c.pid.ki);
    c.pid.kd = vec3_or("hvac.pid.kd", c.pid.kd);
    c.pid.q_min = vec3_or("hvac.pid.q_min", c.pid.q_min);
    c.pid.q_max = vec3_or("hvac.pid.q_max", c.pid.q_max);
    c.pid.rate_limit = vec3_or("hvac.pid.rate_limit", c.pid.rate_limit);
    c.pid.aw_gain = vec3_or("hvac.pid.aw_gain", c.pid.aw_gain);
    c.fw.max_w = vec3_or("hvac.fw.max_w", c.fw.max_w);
    if (kv.has("hvac.fw.t_amb") || kv.has("hvac.fw.fraction")) {
      auto xs = kv.numbers("hvac.fw.t_amb");
      auto ys = kv.numbers("hvac.fw.fraction");
      if (xs.size() != ys.size()) {
        throw std::runtime_error("hvac: floor/wall table key lists differ in length");
      }
      c.fw.fraction_knots.clear();
      for (std::size_t i = 0; i < xs.size(); ++i) c.fw.fraction_knots.push_back({xs[i], ys[i]});
    }
    c.vent_coeff = kv.number_or("hvac.vent_coeff", c.vent_coeff);
    c.validate();
    return c;
  }
};

// Everything the stack produces in one control period.
struct ControlOutput {
  State state = State::Heating;
  Substate substate{};
  Vec3 q_hvac = Vec3::Zero();  // air-side heat per deck (W)
  Vec3 q_fw = Vec3::Zero();    // floor/wall heat per deck (W)
  Vec3 q_vent = Vec3::Zero();  // fresh-air exchange heat per deck (W)
};

// Stateful convenience wrapper running the full stack in the documented
// order: state machine, memory reset on state change, substate, PID,
// floor/wall circuits, ventilation heat.
class HvacController {
 public:
  explicit HvacController(HvacConfig config, Mode mode = Mode::Regular,
                          State initial = State::Heating)
      : config_(std::move(config)), mode_(mode), state_(initial) {
    config_.validate();
    if (!admissible(mode_, state_)) {
      throw std::runtime_error("hvac: initial state not admissible for mode");
    }
  }

  const HvacConfig& config() const { return config_; }
  Mode mode() const { return mode_; }
  State state() const { return state_; }
  const PidMemory& memory() const { return memory_; }

  void set_mode(Mode mode) {
    mode_ = mode;
    if (!admissible(mode_, state_)) {
      state_ = (mode_ == Mode::Off)       ? State::OffState
               : (mode_ == Mode::Slumber) ? State::ActiveVentilation
                                          : State::Heating;
      memory_.reset();
    }
  }

  ControlOutput update(double t_ref, const Vec3& t_room, double t_amb, double occupancy_pct,
                       double dt) {
    ControlOutput out;
    State next = hvac_state_update(mode_, state_, t_room, t_ref, t_amb, config_.thresholds);
    if (next != state_) memory_.reset();
    state_ = next;
    out.state = state_;
    out.substate = hvac_substate_update(state_, t_room, t_amb, occupancy_pct, config_.substate);
    auto [q_hvac, mem] = pid_step(config_.pid, memory_, t_ref, t_room, dt, state_);
    memory_ = mem;
    out.q_hvac = q_hvac;
    out.q_fw = floor_wall_heating(state_, t_amb, config_.fw);
    for (int d = 0; d < 3; ++d) {
      out.q_vent[d] = out.substate.outside_fraction * config_.vent_coeff * (t_amb - t_room[d]);
    }
    return out;
  }

 private:
  HvacConfig config_;
  Mode mode_;
  State state_;
  PidMemory memory_;
};

}  // namespace railtherm::hvac
