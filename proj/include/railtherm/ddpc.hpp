#pragma once

// Receding-horizon comfort-setpoint optimization on top of the multistep
// predictor.
//
// Every control period the optimizer picks the next setpoint sequence
// u(0..T) (plus comfort slacks) by solving a small dense QP:
//
//   J = J_y + sigma J_u + tau J_eps + gamma J_du
//
//   J_y    tracks a passive-comfort proxy temperature per step, split into a
//          deck-average term and a deck-spread term (the split is an exact
//          identity, see jy_decomposition);
//   J_u    keeps setpoints near the ambient rule curve;
//   J_eps  penalizes comfort-band slack use;
//   J_du   smooths setpoint moves.
//
// subject to soft two-sided comfort bands on the predicted room temperatures,
// nonnegative slacks, a hard setpoint corridor around the rule curve, and
// hard setpoint rate bounds. Only u(0) is applied; the horizon recedes.

#include <chrono>
#include <cmath>
#include <deque>
#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "railtherm/coach_sim.hpp"
#include "railtherm/config.hpp"
#include "railtherm/hvac_stack.hpp"
#include "railtherm/qp.hpp"
#include "railtherm/transient_predictor.hpp"
#include "railtherm/types.hpp"

namespace railtherm::ddpc {

using pipeline::kNd;
using pipeline::kNu;
using pipeline::kNy;
using pipeline::kSlice;

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct DdpcConfig {
  int rho = 12;     // past window (lead-in) length, in control periods
  int horizon = 6;  // prediction horizon T, in control periods

  double t_max = 2.0;          // comfort half-band around the rule curve (K)
  double setpoint_band = 2.0;  // hard setpoint corridor around the rule curve (K)
  double delta_t_max = 0.5;    // max setpoint move per control period (K); inf disables

  double sigma = 1.0;   // rule-tracking weight
  double tau = 100.0;   // slack weight (must stay positive: unpenalized slacks
                        // would let the optimizer ignore the comfort band)
  double gamma = 10.0;  // setpoint-move weight

  // Conservative inner margin: the optimizer works against a comfort band
  // shrunk to t_max - t_max_inner (both the soft constraints and the passive
  // proxy clip), leaving headroom against prediction error. Evaluation
  // metrics keep using the full t_max.
  double t_max_inner = 0.0;
  bool eps_per_deck = false;  // one slack per step (shared) or per step and deck

  double t_max_effective() const { return t_max - t_max_inner; }

  void validate() const {
    if (rho < 1 || horizon < 1) throw std::runtime_error("ddpc: rho and horizon must be >= 1");
    if (!(t_max > 0.0)) throw std::runtime_error("ddpc: t_max must be > 0");
    if (!(setpoint_band >= 0.0)) throw std::runtime_error("ddpc: setpoint_band must be >= 0");
    if (!(delta_t_max > 0.0)) throw std::runtime_error("ddpc: delta_t_max must be > 0");
    if (!(sigma >= 0.0) || !(gamma >= 0.0)) {
      throw std::runtime_error("ddpc: objective weights must be >= 0");
    }
    if (!(tau > 0.0)) throw std::runtime_error("ddpc: slack weight tau must be > 0");
    if (!(t_max_inner >= 0.0) || !(t_max_inner < t_max)) {
      throw std::runtime_error("ddpc: t_max_inner must lie in [0, t_max)");
    }
  }

  static DdpcConfig from_config(const cfg::KeyValueFile& kv) {
    DdpcConfig c;
    c.rho = static_cast<int>(kv.number_or("ddpc.rho", c.rho));
    c.horizon = static_cast<int>(kv.number_or("ddpc.horizon", c.horizon));
    c.t_max = kv.number_or("ddpc.t_max", c.t_max);
    c.setpoint_band = kv.number_or("ddpc.setpoint_band", c.setpoint_band);
    c.delta_t_max = kv.number_or("ddpc.delta_t_max", c.delta_t_max);
    c.sigma = kv.number_or("ddpc.sigma", c.sigma);
    c.tau = kv.number_or("ddpc.tau", c.tau);
    c.gamma = kv.number_or("ddpc.gamma", c.gamma);
    c.t_max_inner = kv.number_or("ddpc.t_max_inner", c.t_max_inner);
    c.eps_per_deck = kv.number_or("ddpc.eps_per_deck", c.eps_per_deck ? 1.0 : 0.0) != 0.0;
    c.validate();
    return c;
  }
};

// ---------------------------------------------------------------------------
// Objective decomposition (used by tests and reporting)
// ---------------------------------------------------------------------------

// Splits the per-step comfort tracking cost into its deck-average component
// (weighted by the number of decks) and the deck-spread component:
//
//   sum_d (y_d - r)^2  ==  3 (mean(y) - r)^2 + sum_d (y_d - mean(y))^2
//
// `y_f` stacks deck triples for steps 1..T, `t_opt_f` holds the proxy values
// for the same steps. Returns {average term, spread term}.
inline std::pair<double, double> jy_decomposition(const Eigen::VectorXd& y_f,
                                                  const Eigen::VectorXd& t_opt_f) {
  if (y_f.size() != kNy * t_opt_f.size()) {
    throw std::runtime_error("ddpc: jy_decomposition size mismatch");
  }
  double mean_term = 0.0;
  double spread_term = 0.0;
  for (long k = 0; k < t_opt_f.size(); ++k) {
    Vec3 y = y_f.segment<kNy>(kNy * k);
    double avg = y.mean();
    mean_term += kNy * (avg - t_opt_f[k]) * (avg - t_opt_f[k]);
    spread_term += (y.array() - avg).square().sum();
  }
  return {mean_term, spread_term};
}

// ---------------------------------------------------------------------------
// Passive comfort proxy
// ---------------------------------------------------------------------------

// Heuristic full state from a room-temperature measurement: equipment nodes
// follow the room air, shell nodes sit halfway between the cabin and ambient.
inline coach::CoachState estimate_state(const Vec3& y_meas, double t_amb) {
  coach::CoachState s;
  s.t_room = y_meas;
  s.t_inv = y_meas;
  s.t_chassis = Vec3::Constant(0.5 * (y_meas.mean() + t_amb));
  return s;
}

// Hygienic fresh-air exchange during the open-loop projection. Ventilation is
// driven by occupancy, not by the heating/cooling control block, so it keeps
// running when the actuators are considered off. Leaving it out makes the
// passive trajectory over-promise free warming whenever the coach is busy,
// and the controller then pays real heat chasing it. A zero coefficient
// disables the term.
struct VentilationProxy {
  double vent_coeff = 0.0;  // W/K per deck at full outside air
  hvac::SubstateRule substate{};

  Vec3 heat_w(const Vec3& t_room, const coach::DisturbanceSample& d) const {
    if (vent_coeff == 0.0) return Vec3::Zero();
    const double f =
        hvac::hvac_substate_update(hvac::State::Heating, t_room, d.t_amb_c, d.occupancy_pct,
                                   substate)
            .outside_fraction;
    return f * vent_coeff * (Vec3::Constant(d.t_amb_c) - t_room);
  }
};

// Deck-average free-floating temperature over the horizon: the coach model is
// integrated with the heating/cooling actuators off (only the occupancy-led
// ventilation exchange active), and the result is clipped into the comfort
// band around the rule curve. Index k = 0 is the current instant. This is the
// reference the J_y term tracks: inside the band "do nothing" is optimal,
// outside it the nearest band edge is.
inline Eigen::VectorXd compute_t_opt(const coach::CoachState& estimate,
                                     const std::function<coach::DisturbanceSample(double)>& forecast,
                                     double t_now, const Eigen::VectorXd& t_rule_f,
                                     const DdpcConfig& cfg, const coach::ThermalParams& params,
                                     const coach::HeatDistribution& dist, double control_period_s,
                                     double sim_dt_s, const VentilationProxy& vent = {}) {
  if (t_rule_f.size() != cfg.horizon + 1) {
    throw std::runtime_error("ddpc: t_rule_f must hold horizon + 1 values");
  }
  if (!(sim_dt_s > 0.0) || !(control_period_s > 0.0) || control_period_s < sim_dt_s) {
    throw std::runtime_error("ddpc: invalid integration periods");
  }
  const double clip = cfg.t_max_effective();
  Eigen::VectorXd t_opt(cfg.horizon + 1);
  coach::CoachState state = estimate;
  const long steps_per_period = std::lround(control_period_s / sim_dt_s);

  auto clipped_mean = [&](const coach::CoachState& s, double rule) {
    return std::clamp(s.t_room.mean(), rule - clip, rule + clip);
  };
  t_opt[0] = clipped_mean(state, t_rule_f[0]);
  for (int k = 1; k <= cfg.horizon; ++k) {
    for (long i = 0; i < steps_per_period; ++i) {
      double t_abs = t_now + (k - 1) * control_period_s + i * sim_dt_s;
      const coach::DisturbanceSample d = forecast(t_abs);
      Vec6 q_in = Vec6::Zero();
      q_in.head<3>() = vent.heat_w(state.t_room, d);
      state = coach::step(state, q_in, d, sim_dt_s, params, dist);
    }
    t_opt[k] = clipped_mean(state, t_rule_f[k]);
  }
  return t_opt;
}

// ---------------------------------------------------------------------------
// QP assembly
// ---------------------------------------------------------------------------

// One optimization instance. Decision vector layout: [u(0..T); eps], where
// eps holds one slack per future step (or per step and deck).
struct OcpInstance {
  Eigen::MatrixXd G;       // (3T) x (T+1): response of y_f to the decisions
  Eigen::VectorXd c;       // (3T): response to fixed past + future disturbances
  Eigen::VectorXd t_rule_f;  // T+1
  Eigen::VectorXd t_opt_f;   // T+1 (index 0 pairs with the measured y)
  Vec3 y_now = Vec3::Zero();
  double u_prev = 0.0;
  bool has_u_prev = false;
  DdpcConfig cfg;

  int horizon() const { return cfg.horizon; }
  int n_eps() const { return (cfg.eps_per_deck ? kNy : 1) * cfg.horizon; }
  int n_dec() const { return cfg.horizon + 1 + n_eps(); }
};

struct DenseQp {
  Eigen::MatrixXd P;
  Eigen::VectorXd q;
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  double constant = 0.0;  // J = 0.5 x'Px + q'x + constant
};

// Builds the decision-dependent map y_f = c + G u from the predictor, the
// frozen past window and the disturbance forecast. `z_p_fixed` must be the
// stacked past window with the current input slot zeroed: the current input
// u(0) is a decision and enters through its own predictor column.
inline OcpInstance assemble_qp(const predictor::PredictorModel& model,
                               const Eigen::VectorXd& z_p_fixed, const Eigen::VectorXd& d_f,
                               const Eigen::VectorXd& t_rule_f, const Eigen::VectorXd& t_opt_f,
                               const Vec3& y_now, double u_prev, bool has_u_prev,
                               const DdpcConfig& cfg) {
  cfg.validate();
  const int T = cfg.horizon;
  if (model.horizon != T || model.rho != cfg.rho) {
    throw std::runtime_error("ddpc: model dimensions do not match the controller config");
  }
  if (z_p_fixed.size() != model.zp_len()) throw std::runtime_error("ddpc: z_p has wrong length");
  if (d_f.size() != kNd * T) throw std::runtime_error("ddpc: d_f has wrong length");
  if (t_rule_f.size() != T + 1 || t_opt_f.size() != T + 1) {
    throw std::runtime_error("ddpc: reference vectors must hold horizon + 1 values");
  }
  const long u0_col = kSlice * (cfg.rho - 1) + kNy;  // input slot of the newest past slice
  if (z_p_fixed[u0_col] != 0.0) {
    throw std::runtime_error("ddpc: z_p_fixed must have the current input slot zeroed");
  }

  OcpInstance inst;
  inst.cfg = cfg;
  inst.t_rule_f = t_rule_f;
  inst.t_opt_f = t_opt_f;
  inst.y_now = y_now;
  inst.u_prev = u_prev;
  inst.has_u_prev = has_u_prev;
  inst.G.resize(kNy * T, T + 1);
  inst.G.col(0) = model.h_p().col(u0_col);
  inst.G.rightCols(T) = model.h_u();
  inst.c = model.h_p() * z_p_fixed + model.h_d() * d_f;
  return inst;
}

inline DenseQp to_dense(const OcpInstance& inst) {
  const DdpcConfig& cfg = inst.cfg;
  const int T = cfg.horizon;
  const int nu = T + 1;
  const int ne = inst.n_eps();
  const int n = nu + ne;
  const int eps_per_step = cfg.eps_per_deck ? kNy : 1;

  DenseQp qp;
  qp.P = Eigen::MatrixXd::Zero(n, n);
  qp.q = Eigen::VectorXd::Zero(n);
  qp.constant = 0.0;

  // J_y: track the comfort proxy per deck over steps 1..T (step 0 involves
  // only the measurement and contributes a constant).
  Eigen::VectorXd r(kNy * T);
  for (int k = 1; k <= T; ++k) r.segment(kNy * (k - 1), kNy).setConstant(inst.t_opt_f[k]);
  qp.P.topLeftCorner(nu, nu) += 2.0 * inst.G.transpose() * inst.G;
  qp.q.head(nu) += 2.0 * inst.G.transpose() * (inst.c - r);
  qp.constant += (inst.c - r).squaredNorm();
  qp.constant += (inst.y_now.array() - inst.t_opt_f[0]).square().sum();

  // sigma J_u: keep setpoints near the rule curve.
  qp.P.topLeftCorner(nu, nu).diagonal().array() += 2.0 * cfg.sigma;
  qp.q.head(nu) -= 2.0 * cfg.sigma * inst.t_rule_f;
  qp.constant += cfg.sigma * inst.t_rule_f.squaredNorm();

  // tau J_eps.
  qp.P.bottomRightCorner(ne, ne).diagonal().array() += 2.0 * cfg.tau;

  // gamma J_du: successive moves, plus the move off the previously applied
  // setpoint when one exists.
  for (int k = 1; k <= T; ++k) {
    qp.P(k - 1, k - 1) += 2.0 * cfg.gamma;
    qp.P(k, k) += 2.0 * cfg.gamma;
    qp.P(k - 1, k) -= 2.0 * cfg.gamma;
    qp.P(k, k - 1) -= 2.0 * cfg.gamma;
  }
  if (inst.has_u_prev) {
    qp.P(0, 0) += 2.0 * cfg.gamma;
    qp.q[0] -= 2.0 * cfg.gamma * inst.u_prev;
    qp.constant += cfg.gamma * inst.u_prev * inst.u_prev;
  }

  // Keep the Hessian strictly positive definite even for a degenerate
  // rule-tracking weight (sigma set to zero).
  if (!(cfg.sigma > 0.0)) {
    qp.P.diagonal().array() += 1e-9 * std::max(1.0, qp.P.diagonal().maxCoeff());
  }

  // Constraint rows. An infinite rate bound drops the rate rows entirely.
  const bool rate_bounded = std::isfinite(cfg.delta_t_max);
  const int n_rate = rate_bounded ? 2 * (T + (inst.has_u_prev ? 1 : 0)) : 0;
  const int m = 2 * kNy * T + ne + 2 * nu + n_rate;
  qp.A = Eigen::MatrixXd::Zero(m, n);
  qp.b = Eigen::VectorXd::Zero(m);
  int row = 0;

  // Soft comfort band: |y_dk - t_rule_k| <= (t_max - t_max_inner) + eps.
  const double band = cfg.t_max_effective();
  for (int k = 1; k <= T; ++k) {
    for (int d = 0; d < kNy; ++d) {
      const int yrow = kNy * (k - 1) + d;
      const int ecol = nu + eps_per_step * (k - 1) + (cfg.eps_per_deck ? d : 0);
      qp.A.block(row, 0, 1, nu) = inst.G.row(yrow);
      qp.A(row, ecol) = -1.0;
      qp.b[row] = inst.t_rule_f[k] + band - inst.c[yrow];
      ++row;
      qp.A.block(row, 0, 1, nu) = -inst.G.row(yrow);
      qp.A(row, ecol) = -1.0;
      qp.b[row] = -(inst.t_rule_f[k] - band) + inst.c[yrow];
      ++row;
    }
  }
  // Slack nonnegativity.
  for (int e = 0; e < ne; ++e) {
    qp.A(row, nu + e) = -1.0;
    qp.b[row] = 0.0;
    ++row;
  }
  // Hard setpoint corridor, including the immediately applied u(0).
  for (int k = 0; k <= T; ++k) {
    qp.A(row, k) = 1.0;
    qp.b[row] = inst.t_rule_f[k] + cfg.setpoint_band;
    ++row;
    qp.A(row, k) = -1.0;
    qp.b[row] = -(inst.t_rule_f[k] - cfg.setpoint_band);
    ++row;
  }
  // Rate bounds, including the move off the previously applied setpoint.
  if (rate_bounded) {
    for (int k = 1; k <= T; ++k) {
      qp.A(row, k) = 1.0;
      qp.A(row, k - 1) = -1.0;
      qp.b[row] = cfg.delta_t_max;
      ++row;
      qp.A(row, k) = -1.0;
      qp.A(row, k - 1) = 1.0;
      qp.b[row] = cfg.delta_t_max;
      ++row;
    }
    if (inst.has_u_prev) {
      qp.A(row, 0) = 1.0;
      qp.b[row] = inst.u_prev + cfg.delta_t_max;
      ++row;
      qp.A(row, 0) = -1.0;
      qp.b[row] = -(inst.u_prev - cfg.delta_t_max);
      ++row;
    }
  }
  if (row != m) throw std::runtime_error("ddpc: constraint row count mismatch");
  return qp;
}

// ---------------------------------------------------------------------------
// Solve
// ---------------------------------------------------------------------------

struct OcpSolution {
  Eigen::VectorXd u_star;    // T+1 setpoints
  Eigen::VectorXd y_star;    // 3T predicted room temperatures
  Eigen::VectorXd eps_star;  // comfort slacks
  double objective = 0.0;    // full J including constant terms
  qp::Status status = qp::Status::MaxIter;
  int iterations = 0;
  double solve_ms = 0.0;
  double stationarity = 0.0;
  double primal_infeas = 0.0;
  double dual_infeas = 0.0;
  double complementarity = 0.0;
};

inline OcpSolution solve_qp(const OcpInstance& inst, const qp::Options& opt = qp::Options{}) {
  const auto t0 = std::chrono::steady_clock::now();
  DenseQp d = to_dense(inst);
  qp::Result r = qp::solve(d.P, d.q, d.A, d.b, opt);
  const auto t1 = std::chrono::steady_clock::now();

  OcpSolution sol;
  sol.status = r.status;
  sol.iterations = r.iterations;
  sol.solve_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
  const int nu = inst.horizon() + 1;
  sol.u_star = r.x.head(nu);
  sol.eps_star = r.x.tail(inst.n_eps());
  sol.y_star = inst.c + inst.G * sol.u_star;
  sol.objective = r.objective + d.constant;
  sol.stationarity = r.stationarity;
  sol.primal_infeas = r.primal_infeas;
  sol.dual_infeas = r.dual_infeas;
  sol.complementarity = r.complementarity;
  return sol;
}

// ---------------------------------------------------------------------------
// Rolling history and the receding-horizon controller
// ---------------------------------------------------------------------------

class History {
 public:
  explicit History(int rho) : rho_(rho) {
    if (rho < 1) throw std::runtime_error("ddpc: history needs rho >= 1");
  }

  // Record a completed control period: the measurement seen at its start,
  // the input actually applied, and the disturbance draw that held.
  void push(const Vec3& y, double u, const Vec5& d) {
    samples_.push_back({y, u, d});
    while (samples_.size() > static_cast<std::size_t>(rho_)) samples_.pop_front();
  }

  int completed() const { return static_cast<int>(samples_.size()); }

  // The optimizer engages once rho control periods have completed; its past
  // window is the rho-1 most recent completed slices plus the current one.
  bool ready() const { return completed() >= rho_; }

  // Past window for the optimizer: the rho-1 most recent completed slices
  // followed by the current slice, whose input slot is left at zero (the
  // optimizer decides it).
  Eigen::VectorXd z_p_fixed(const Vec3& y_now, const Vec5& d_now) const {
    if (!ready()) throw std::runtime_error("ddpc: history not yet filled");
    Eigen::VectorXd z = Eigen::VectorXd::Zero(kSlice * rho_);
    const std::size_t n = samples_.size();
    for (int s = 0; s < rho_ - 1; ++s) {
      const Sample& smp = samples_[n - static_cast<std::size_t>(rho_ - 1) + s];
      z.segment(kSlice * s, kNy) = smp.y;
      z[kSlice * s + kNy] = smp.u;
      z.segment(kSlice * s + kNy + kNu, kNd) = smp.d;
    }
    const long base = kSlice * (rho_ - 1);
    z.segment(base, kNy) = y_now;
    // input slot stays zero
    z.segment(base + kNy + kNu, kNd) = d_now;
    return z;
  }

 private:
  struct Sample {
    Vec3 y;
    double u;
    Vec5 d;
  };
  int rho_;
  std::deque<Sample> samples_;
};

inline Vec5 disturbance_vector(const coach::DisturbanceSample& d) {
  auto [q_top, q_side] = coach::solar_components(d.q_g_w_per_m2, d.alpha_rad, d.beta_rad,
                                                 d.theta_rad);
  Vec5 v;
  v << d.t_amb_c, q_top, q_side, d.occupancy_pct, d.speed_ms;
  return v;
}

class Controller {
 public:
  struct Dependencies {
    predictor::PredictorModel model;
    DdpcConfig cfg;
    hvac::RuleTable rule;
    coach::ThermalParams sim_params;        // proxy model for compute_t_opt
    coach::HeatDistribution distribution;
    VentilationProxy vent{};                // fresh-air exchange in the proxy
    double control_period_s = 300.0;
    double sim_dt_s = 10.0;
  };

  struct StepRecord {
    double t = 0.0;
    double u_star = 0.0;
    double t_rule = 0.0;
    double t_opt0 = 0.0;
    double eps_max = 0.0;
    double objective = 0.0;
    qp::Status status = qp::Status::Optimal;
    double solve_ms = 0.0;
    bool warmup = false;
    bool fallback = false;
    int iterations = 0;
    double stationarity = 0.0;
    double primal_infeas = 0.0;
    double complementarity = 0.0;
  };

  explicit Controller(Dependencies deps) : deps_(std::move(deps)), history_(deps_.cfg.rho) {
    deps_.cfg.validate();
    deps_.model.validate();
    if (deps_.model.rho != deps_.cfg.rho || deps_.model.horizon != deps_.cfg.horizon) {
      throw std::runtime_error("ddpc: model and config dimensions disagree");
    }
  }

  // One control period. `y_meas` is the (possibly noise-corrupted) room
  // temperature measurement, `d_now` the current disturbance draw, and
  // `forecast` the disturbance preview used for the horizon. Returns the
  // setpoint to apply until the next call.
  double step(double t, const Vec3& y_meas, const coach::DisturbanceSample& d_now,
              const std::function<coach::DisturbanceSample(double)>& forecast) {
    const DdpcConfig& cfg = deps_.cfg;
    const int T = cfg.horizon;
    const double period = deps_.control_period_s;

    Eigen::VectorXd t_rule_f(T + 1);
    for (int k = 0; k <= T; ++k) {
      t_rule_f[k] = deps_.rule(k == 0 ? d_now.t_amb_c : forecast(t + k * period).t_amb_c);
    }

    StepRecord rec;
    rec.t = t;
    rec.t_rule = t_rule_f[0];
    const Vec5 d_vec = disturbance_vector(d_now);

    if (!history_.ready()) {
      // Warm-up: follow the rule curve until the past window is filled.
      rec.warmup = true;
      rec.u_star = t_rule_f[0];
      rec.t_opt0 = t_rule_f[0];
      finish_step(rec, y_meas, d_vec);
      return rec.u_star;
    }

    Eigen::VectorXd t_opt_f =
        compute_t_opt(estimate_state(y_meas, d_now.t_amb_c), forecast, t, t_rule_f, cfg,
                      deps_.sim_params, deps_.distribution, period, deps_.sim_dt_s, deps_.vent);
    Eigen::VectorXd d_f(kNd * T);
    for (int k = 1; k <= T; ++k) {
      d_f.segment(kNd * (k - 1), kNd) = disturbance_vector(forecast(t + k * period));
    }
    Eigen::VectorXd z_p = history_.z_p_fixed(y_meas, d_vec);
    OcpInstance inst = assemble_qp(deps_.model, z_p, d_f, t_rule_f, t_opt_f, y_meas, u_prev_,
                                   has_u_prev_, cfg);
    OcpSolution sol = solve_qp(inst);

    rec.t_opt0 = t_opt_f[0];
    rec.objective = sol.objective;
    rec.status = sol.status;
    rec.solve_ms = sol.solve_ms;
    rec.iterations = sol.iterations;
    rec.stationarity = sol.stationarity;
    rec.primal_infeas = sol.primal_infeas;
    rec.complementarity = sol.complementarity;
    rec.eps_max = sol.eps_star.size() > 0 ? sol.eps_star.maxCoeff() : 0.0;

    double u_raw;
    if (sol.status == qp::Status::Optimal) {
      u_raw = sol.u_star[0];
    } else {
      // Degraded solve: keep the previous setpoint (or the rule value on the
      // very first optimized step) and let the projection below box it in.
      rec.fallback = true;
      u_raw = has_u_prev_ ? u_prev_ : t_rule_f[0];
    }
    // Hard projection into the applied-input boxes. The optimum already
    // satisfies both constraints to solver tolerance; this snap makes them
    // hold exactly (rate window first, rule corridor last so the comfort
    // corridor always wins).
    if (has_u_prev_ && std::isfinite(cfg.delta_t_max)) {
      u_raw = std::clamp(u_raw, u_prev_ - cfg.delta_t_max, u_prev_ + cfg.delta_t_max);
    }
    rec.u_star =
        std::clamp(u_raw, t_rule_f[0] - cfg.setpoint_band, t_rule_f[0] + cfg.setpoint_band);
    finish_step(rec, y_meas, d_vec);
    return rec.u_star;
  }

  const std::vector<StepRecord>& log() const { return log_; }
  const Dependencies& deps() const { return deps_; }
  bool warmed_up() const { return history_.ready(); }

 private:
  void finish_step(StepRecord& rec, const Vec3& y_meas, const Vec5& d_vec) {
    history_.push(y_meas, rec.u_star, d_vec);
    u_prev_ = rec.u_star;
    has_u_prev_ = true;
    log_.push_back(rec);
  }

  Dependencies deps_;
  History history_;
  double u_prev_ = 0.0;
  bool has_u_prev_ = false;
  std::vector<StepRecord> log_;
};

}  // namespace railtherm::ddpc
