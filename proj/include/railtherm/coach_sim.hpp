#pragma once

// Lumped-parameter thermal model of a double-deck rail coach.
//
// The coach is reduced to nine thermal nodes: one air node per passenger deck
// (upper / middle / lower), one interior-equipment node per deck, and three
// chassis/shell nodes (roof shell, intermediate floor, lower floor). Heat
// moves between nodes through a fixed convection / conduction topology; the
// shell nodes additionally exchange heat with ambient air (speed-dependent
// convection), absorb solar gains, and the lower floor receives long-wave
// radiation from the track bed on hot days. Occupants, door openings and the
// HVAC actuators inject heat directly.
//
// All temperatures are degrees Celsius, heat flows are Watts, and the state
// advances with a classic fixed-step RK4 integrator under a zero-order hold
// on inputs and disturbances.

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

#include "railtherm/config.hpp"
#include "railtherm/types.hpp"

namespace railtherm::coach {

// ---------------------------------------------------------------------------
// Node layout
// ---------------------------------------------------------------------------

enum Node : int {
  kRoomUp = 0,
  kRoomMid = 1,
  kRoomLow = 2,
  kInvUp = 3,
  kInvMid = 4,
  kInvLow = 5,
  kChassisUp = 6,   // ceiling / roof shell
  kChassisMid = 7,  // intermediate floor between decks
  kChassisLow = 8,  // lower floor
};

inline constexpr int kNumNodes = 9;
inline constexpr int kNumDecks = 3;

inline constexpr std::array<const char*, kNumNodes> kNodeNames = {
    "room_up",    "room_mid",    "room_low",    "inv_up",      "inv_mid",
    "inv_low",    "chassis_up",  "chassis_mid", "chassis_low"};

struct NodePair {
  int a;
  int b;
};

// Interior convection topology (air-side couplings).
inline constexpr std::array<NodePair, 11> kConvPairs = {{
    {kRoomLow, kRoomMid},     // stairwell air exchange, lower <-> middle
    {kRoomMid, kRoomUp},      // stairwell air exchange, middle <-> upper
    {kRoomUp, kInvUp},        // deck air <-> interior equipment
    {kRoomMid, kInvMid},
    {kRoomLow, kInvLow},
    {kChassisLow, kRoomLow},  // lower floor <-> lower deck air
    {kChassisLow, kRoomMid},  // lower floor edge <-> middle deck air
    {kRoomLow, kChassisMid},  // lower deck air <-> intermediate floor
    {kChassisMid, kRoomUp},   // intermediate floor <-> upper deck air
    {kRoomUp, kChassisUp},    // upper deck air <-> ceiling shell
    {kRoomMid, kChassisUp},   // middle deck edge <-> ceiling shell
}};

// Structural conduction inside the shell.
inline constexpr std::array<NodePair, 3> kCondPairs = {{
    {kChassisLow, kChassisMid},
    {kChassisMid, kChassisUp},
    {kChassisLow, kChassisUp},  // side-wall path bypassing the mid floor
}};

// The six actuator channels and the nodes they feed: channels 0..2 are the
// per-deck air-side heat flows (into the room air nodes), channels 3..5 the
// floor/wall heating circuits (into the shell nodes, upper/mid/lower).
inline constexpr std::array<int, 6> kChannelNodes = {
    kRoomUp, kRoomMid, kRoomLow, kChassisUp, kChassisMid, kChassisLow};

// ---------------------------------------------------------------------------
// Parameters (config keys mirror the field names below)
// ---------------------------------------------------------------------------

struct ThermalParams {
  std::array<double, kNumNodes> mass{};           // kg, lumped node mass
  std::array<double, kNumNodes> heat_capacity{};  // J/(kg K)
  std::array<double, kConvPairs.size()> conv_coeff{};  // W/K per convection pair
  std::array<double, kCondPairs.size()> cond_coeff{};  // W/K per conduction pair

  // Shell <-> ambient convection, applied to chassis_up and chassis_low:
  // h(V) = ext_conv_base + ext_conv_speed_gain * V.
  double ext_conv_base = 60.0;        // W/K
  double ext_conv_speed_gain = 4.0;   // W/(K (m/s))

  // Effective absorbing areas (m^2) for the two solar projections.
  double window_gain_top = 8.0;
  double window_gain_side = 1.5;

  // Track-bed long-wave radiation onto the lower floor (hot days only).
  double ground_emis_coeff = 2.0e-7;  // W/K^4
  double ground_threshold = 20.0;     // degC; no exchange at or below
  double track_temp_slope = 1.0;      // T_track = slope * t_amb + offset
  double track_temp_offset = 10.0;    // degC

  double door_coeff = 150.0;  // W/K open-door exchange, lower deck only

  double occupant_power = 100.0;  // W per passenger
  double max_capacity = 120.0;    // persons
  Vec3 occupant_split = Vec3::Constant(1.0 / 3.0);  // across room nodes

  void validate() const {
    for (int i = 0; i < kNumNodes; ++i) {
      if (!(mass[i] > 0.0)) {
        throw std::runtime_error(std::string("coach: mass must be positive at node ") +
                                 kNodeNames[i]);
      }
      if (!(heat_capacity[i] > 0.0)) {
        throw std::runtime_error(std::string("coach: heat capacity must be positive at node ") +
                                 kNodeNames[i]);
      }
    }
    for (double k : conv_coeff) {
      if (!(k >= 0.0)) throw std::runtime_error("coach: convection coefficients must be >= 0");
    }
    for (double k : cond_coeff) {
      if (!(k >= 0.0)) throw std::runtime_error("coach: conduction coefficients must be >= 0");
    }
    if (!(ext_conv_base >= 0.0) || !(ext_conv_speed_gain >= 0.0)) {
      throw std::runtime_error("coach: exterior convection coefficients must be >= 0");
    }
    if (!(window_gain_top >= 0.0) || !(window_gain_side >= 0.0)) {
      throw std::runtime_error("coach: solar gains must be >= 0");
    }
    if (!(ground_emis_coeff >= 0.0)) {
      throw std::runtime_error("coach: ground radiation coefficient must be >= 0");
    }
    if (!(door_coeff >= 0.0)) throw std::runtime_error("coach: door coefficient must be >= 0");
    if (!(occupant_power >= 0.0)) throw std::runtime_error("coach: occupant power must be >= 0");
    if (!(max_capacity >= 0.0)) throw std::runtime_error("coach: max capacity must be >= 0");
    if (std::abs(occupant_split.sum() - 1.0) > 1e-9 || occupant_split.minCoeff() < 0.0) {
      throw std::runtime_error("coach: occupant split must be nonnegative and sum to 1");
    }
  }

  static ThermalParams defaults() {
    ThermalParams p;
    // Deck air + interior trim.
    for (int i : {kRoomUp, kRoomMid, kRoomLow}) {
      p.mass[i] = 400.0;
      p.heat_capacity[i] = 1000.0;
    }
    // On-board equipment cabinets.
    for (int i : {kInvUp, kInvMid, kInvLow}) {
      p.mass[i] = 300.0;
      p.heat_capacity[i] = 500.0;
    }
    // Steel shell sections.
    for (int i : {kChassisUp, kChassisMid, kChassisLow}) {
      p.mass[i] = 3000.0;
      p.heat_capacity[i] = 500.0;
    }
    p.conv_coeff = {80.0, 80.0,        // deck <-> deck air exchange
                    30.0, 30.0, 30.0,  // deck <-> equipment
                    35.0, 20.0,        // lower floor <-> lower/middle air
                    20.0, 35.0,        // mid floor <-> lower/upper air
                    35.0, 20.0};       // ceiling <-> upper/middle air
    p.cond_coeff = {60.0, 60.0, 20.0};
    return p;
  }

  static ThermalParams from_config(const cfg::KeyValueFile& kv);
};

// Distribution of the six commanded heat inputs onto the six actuator
// channels: q_act = lambda * q_in. Entry (i, j) is the fraction of commanded
// channel j delivered to actual channel i; every column must sum to one so
// actuator energy is conserved.
struct HeatDistribution {
  Mat6 lambda = Mat6::Identity();

  void validate() const {
    for (int j = 0; j < 6; ++j) {
      if (lambda.col(j).minCoeff() < 0.0 || lambda.col(j).maxCoeff() > 1.0) {
        throw std::runtime_error("coach: heat distribution entries must lie in [0, 1]");
      }
      if (std::abs(lambda.col(j).sum() - 1.0) > 1e-12) {
        throw std::runtime_error("coach: heat distribution column " + std::to_string(j) +
                                 " must sum to 1");
      }
    }
  }

  static HeatDistribution defaults() { return HeatDistribution{}; }
};

// ---------------------------------------------------------------------------
// State and disturbances
// ---------------------------------------------------------------------------

struct CoachState {
  Vec3 t_room = Vec3::Constant(18.0);     // [up, mid, low]
  Vec3 t_inv = Vec3::Constant(18.0);      // [up, mid, low]
  Vec3 t_chassis = Vec3::Constant(14.0);  // [up, mid, low]

  Vec9 as_vector() const {
    Vec9 v;
    v << t_room, t_inv, t_chassis;
    return v;
  }

  static CoachState from_vector(const Vec9& v) {
    CoachState s;
    s.t_room = v.segment<3>(0);
    s.t_inv = v.segment<3>(3);
    s.t_chassis = v.segment<3>(6);
    return s;
  }
};

inline constexpr double kSanityMinC = -60.0;
inline constexpr double kSanityMaxC = 100.0;

struct DisturbanceSample {
  double t_amb_c = 10.0;       // ambient air temperature
  double q_g_w_per_m2 = 0.0;   // global solar irradiance
  double alpha_rad = 0.0;      // solar elevation angle
  double beta_rad = 0.0;       // solar azimuth
  double theta_rad = 0.0;      // train heading
  double occupancy_pct = 0.0;  // fraction of max capacity in [0, 1]
  double speed_ms = 0.0;       // train speed
  bool door_open = false;

  void validate() const {
    if (!std::isfinite(t_amb_c) || !std::isfinite(q_g_w_per_m2) || !std::isfinite(alpha_rad) ||
        !std::isfinite(beta_rad) || !std::isfinite(theta_rad) || !std::isfinite(occupancy_pct) ||
        !std::isfinite(speed_ms)) {
      throw std::runtime_error("coach: non-finite disturbance sample");
    }
    if (q_g_w_per_m2 < 0.0) throw std::runtime_error("coach: irradiance must be >= 0");
    if (occupancy_pct < 0.0 || occupancy_pct > 1.0) {
      throw std::runtime_error("coach: occupancy must lie in [0, 1]");
    }
    if (speed_ms < 0.0) throw std::runtime_error("coach: speed must be >= 0");
  }
};

// ---------------------------------------------------------------------------
// Heat flow pieces (exposed individually for testing and for the data
// pipeline, which needs the same solar projections when building
// disturbance vectors)
// ---------------------------------------------------------------------------

// Projects global irradiance onto the roof (top) and the sun-facing side of
// the coach. `alpha` is the solar elevation, `beta` the solar azimuth and
// `theta` the train heading.
inline std::pair<double, double> solar_components(double q_g, double alpha, double beta,
                                                  double theta) {
  if (!(q_g >= 0.0)) throw std::runtime_error("coach: irradiance must be >= 0");
  double top = std::abs(q_g * std::cos(alpha));
  double side = std::abs(q_g * std::sin(alpha) * std::sin(beta - theta));
  return {top, side};
}

// Long-wave exchange between the track bed and the lower floor. Active only
// above the hot-day threshold; the radiative balance is computed in Kelvin
// with the track temperature an affine map of the ambient temperature.
inline double ground_radiation(double t_amb_c, double t_chassis_low_c, const ThermalParams& p) {
  if (!(t_amb_c > p.ground_threshold)) return 0.0;
  double t_track_k = p.track_temp_slope * t_amb_c + p.track_temp_offset + 273.15;
  double t_floor_k = t_chassis_low_c + 273.15;
  double t2 = t_track_k * t_track_k;
  double f2 = t_floor_k * t_floor_k;
  return p.ground_emis_coeff * (t2 * t2 - f2 * f2);
}

inline int occupant_count(double occupancy_pct, const ThermalParams& p) {
  return static_cast<int>(std::lround(occupancy_pct * p.max_capacity));
}

// Metabolic heat per deck: round(occupancy_pct * max_capacity) passengers at
// occupant_power watts each, split across the decks by the configured ratio.
inline Vec3 occupancy_heat(double occupancy_pct, const ThermalParams& p) {
  if (!(occupancy_pct >= 0.0 && occupancy_pct <= 1.0)) {
    throw std::runtime_error("coach: occupancy must lie in [0, 1]");
  }
  double total = occupant_count(occupancy_pct, p) * p.occupant_power;
  return p.occupant_split * total;
}

// Open-door heat exchange with ambient; affects only the lower-deck room
// node. Returns 0 W with the doors closed.
inline double door_exchange(double t_amb_c, double t_room_low_c, bool door_open,
                            const ThermalParams& p) {
  if (!door_open) return 0.0;
  return p.door_coeff * (t_amb_c - t_room_low_c);
}

// Maps the six commanded powers onto the six actuator channels, conserving
// the total: q_act = lambda * q_in.
inline Vec6 distribute_heat(const Vec6& q_in, const HeatDistribution& dist) {
  dist.validate();
  return dist.lambda * q_in;
}

// ---------------------------------------------------------------------------
// Dynamics
// ---------------------------------------------------------------------------

// Time derivative of all node temperatures (K/s). `q_act` holds the six
// actuator-channel powers after distribution (channels 0..2 into the room
// air nodes, 3..5 into the shell nodes).
inline Vec9 state_derivative(const CoachState& state, const Vec6& q_act,
                             const DisturbanceSample& d, const ThermalParams& p) {
  const Vec9 T = state.as_vector();
  Vec9 q = Vec9::Zero();
  for (int j = 0; j < 6; ++j) q[kChannelNodes[j]] += q_act[j];

  // Pairwise interior exchange: heat k*(T_a - T_b) leaves node a and enters
  // node b, so internal flows cancel exactly in the node-energy ledger.
  for (std::size_t i = 0; i < kConvPairs.size(); ++i) {
    double f = p.conv_coeff[i] * (T[kConvPairs[i].a] - T[kConvPairs[i].b]);
    q[kConvPairs[i].a] -= f;
    q[kConvPairs[i].b] += f;
  }
  for (std::size_t i = 0; i < kCondPairs.size(); ++i) {
    double f = p.cond_coeff[i] * (T[kCondPairs[i].a] - T[kCondPairs[i].b]);
    q[kCondPairs[i].a] -= f;
    q[kCondPairs[i].b] += f;
  }

  // Shell <-> ambient convection, stronger when the train moves.
  double h_ext = p.ext_conv_base + p.ext_conv_speed_gain * d.speed_ms;
  q[kChassisUp] += h_ext * (d.t_amb_c - T[kChassisUp]);
  q[kChassisLow] += h_ext * (d.t_amb_c - T[kChassisLow]);

  // Solar gains: roof projection heats the ceiling shell, side projection
  // heats each deck through the windows.
  auto [q_top, q_side] = solar_components(d.q_g_w_per_m2, d.alpha_rad, d.beta_rad, d.theta_rad);
  q[kChassisUp] += p.window_gain_top * q_top;
  q[kRoomUp] += p.window_gain_side * q_side;
  q[kRoomMid] += p.window_gain_side * q_side;
  q[kRoomLow] += p.window_gain_side * q_side;

  // Track-bed radiation onto the lower floor (hot days only).
  q[kChassisLow] += ground_radiation(d.t_amb_c, T[kChassisLow], p);

  // Occupants.
  Vec3 q_occ = occupancy_heat(d.occupancy_pct, p);
  q[kRoomUp] += q_occ[0];
  q[kRoomMid] += q_occ[1];
  q[kRoomLow] += q_occ[2];

  // Open door: ambient exchange with the lower deck air.
  q[kRoomLow] += door_exchange(d.t_amb_c, T[kRoomLow], d.door_open, p);

  Vec9 dT;
  for (int i = 0; i < kNumNodes; ++i) {
    dT[i] = q[i] / (p.mass[i] * p.heat_capacity[i]);
  }
  return dT;
}

// One RK4 step of length `dt` under a zero-order hold on inputs and
// disturbances; the commanded powers are passed through the distribution
// matrix first. Throws if the resulting state leaves the sanity band.
inline CoachState step(const CoachState& state, const Vec6& q_in, const DisturbanceSample& d,
                       double dt, const ThermalParams& p, const HeatDistribution& dist) {
  if (!(dt > 0.0)) throw std::runtime_error("coach: step size must be positive");
  d.validate();
  const Vec6 q_act = distribute_heat(q_in, dist);

  auto f = [&](const Vec9& v) {
    return state_derivative(CoachState::from_vector(v), q_act, d, p);
  };
  const Vec9 x = state.as_vector();
  const Vec9 k1 = f(x);
  const Vec9 k2 = f(x + 0.5 * dt * k1);
  const Vec9 k3 = f(x + 0.5 * dt * k2);
  const Vec9 k4 = f(x + dt * k3);
  const Vec9 x_next = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);

  for (int i = 0; i < kNumNodes; ++i) {
    if (!std::isfinite(x_next[i]) || x_next[i] < kSanityMinC || x_next[i] > kSanityMaxC) {
      throw std::runtime_error(std::string("coach: integration left the sanity band at node ") +
                               kNodeNames[i] + " (value " + std::to_string(x_next[i]) + " degC)");
    }
  }
  return CoachState::from_vector(x_next);
}

// ---------------------------------------------------------------------------
// Config binding (keys mirror the parameter field names)
// ---------------------------------------------------------------------------

inline ThermalParams ThermalParams::from_config(const cfg::KeyValueFile& kv) {
  ThermalParams p = defaults();
  for (int i = 0; i < kNumNodes; ++i) {
    std::string node = kNodeNames[i];
    p.mass[i] = kv.number_or("mass." + node, p.mass[i]);
    p.heat_capacity[i] = kv.number_or("heat_capacity." + node, p.heat_capacity[i]);
  }
  for (std::size_t i = 0; i < kConvPairs.size(); ++i) {
    std::string key = std::string("conv_coeff.") + kNodeNames[kConvPairs[i].a] + "." +
                      kNodeNames[kConvPairs[i].b];
    p.conv_coeff[i] = kv.number_or(key, p.conv_coeff[i]);
  }
  for (std::size_t i = 0; i < kCondPairs.size(); ++i) {
    std::string key = std::string("cond_coeff.") + kNodeNames[kCondPairs[i].a] + "." +
                      kNodeNames[kCondPairs[i].b];
    p.cond_coeff[i] = kv.number_or(key, p.cond_coeff[i]);
  }
  p.ext_conv_base = kv.number_or("ext_conv_base", p.ext_conv_base);
  p.ext_conv_speed_gain = kv.number_or("ext_conv_speed_gain", p.ext_conv_speed_gain);
  p.window_gain_top = kv.number_or("window_gain_top", p.window_gain_top);
  p.window_gain_side = kv.number_or("window_gain_side", p.window_gain_side);
  p.ground_emis_coeff = kv.number_or("ground_emis_coeff", p.ground_emis_coeff);
  p.ground_threshold = kv.number_or("ground_threshold", p.ground_threshold);
  p.track_temp_slope = kv.number_or("track_temp_slope", p.track_temp_slope);
  p.track_temp_offset = kv.number_or("track_temp_offset", p.track_temp_offset);
  p.door_coeff = kv.number_or("door_coeff", p.door_coeff);
  p.occupant_power = kv.number_or("occupant_power", p.occupant_power);
  p.max_capacity = kv.number_or("max_capacity", p.max_capacity);
  if (kv.has("occupant_split")) {
    auto v = kv.numbers_n("occupant_split", 3);
    p.occupant_split = Vec3(v[0], v[1], v[2]);
  }
  p.validate();
  return p;
}

inline HeatDistribution heat_distribution_from_config(const cfg::KeyValueFile& kv) {
  HeatDistribution d;
  for (int r = 0; r < 6; ++r) {
    std::string key = "lambda.row" + std::to_string(r);
    if (kv.has(key)) {
      auto v = kv.numbers_n(key, 6);
      for (int c = 0; c < 6; ++c) d.lambda(r, c) = v[c];
    }
  }
  d.validate();
  return d;
}

}  // namespace railtherm::coach
