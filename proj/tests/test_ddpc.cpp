// Receding-horizon setpoint optimizer: objective decomposition, passive
// comfort proxy, QP assembly/solve, rolling history, and the controller loop.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <random>

#include "railtherm/ddpc.hpp"
#include "support/oracles.hpp"

using namespace railtherm;
using pipeline::kNd;
using pipeline::kNy;
using pipeline::kSlice;
using Catch::Approx;

namespace {

coach::DisturbanceSample mild_weather(double t_amb = 10.0) {
  coach::DisturbanceSample d;
  d.t_amb_c = t_amb;
  d.q_g_w_per_m2 = 0.0;
  d.alpha_rad = 0.0;
  d.beta_rad = 0.0;
  d.theta_rad = 0.0;
  d.occupancy_pct = 0.3;
  d.speed_ms = 10.0;
  d.door_open = false;
  return d;
}

// Small but structurally valid predictor: fitted on random full-rank data.
predictor::PredictorModel small_model(int rho, int horizon, std::mt19937_64& rng) {
  pipeline::HankelSet hs = testsupport::random_hankel_set(rho, horizon, 160, rng);
  return predictor::fit(hs);
}

ddpc::DdpcConfig small_cfg() {
  ddpc::DdpcConfig cfg;
  cfg.rho = 3;
  cfg.horizon = 4;
  return cfg;
}

}  // namespace

TEST_CASE("tracking cost splits exactly into average and spread terms") {
  Eigen::VectorXd y(3);
  y << 1.0, 2.0, 3.0;
  Eigen::VectorXd r(1);
  r << 2.0;
  auto [mean_term, spread_term] = ddpc::jy_decomposition(y, r);
  CHECK(mean_term == 0.0);
  CHECK(spread_term == 2.0);

  // Direct J_y for the same data.
  double jy = (y.array() - 2.0).square().sum();
  CHECK(jy == Approx(mean_term + spread_term).margin(1e-15));

  CHECK_THROWS(ddpc::jy_decomposition(Eigen::VectorXd::Zero(4), r));
}

TEST_CASE("decomposition identity holds on random instances") {
  std::mt19937_64 rng(71);
  std::uniform_int_distribution<int> horizon_pick(1, 8);
  for (int trial = 0; trial < 200; ++trial) {
    const int steps = horizon_pick(rng);
    Eigen::VectorXd y = 20.0 * testsupport::random_vector(3 * steps, rng);
    Eigen::VectorXd r = 20.0 * testsupport::random_vector(steps, rng);
    double jy = 0.0;
    for (int k = 0; k < steps; ++k) {
      jy += (y.segment(3 * k, 3).array() - r[k]).square().sum();
    }
    auto [mean_term, spread_term] = ddpc::jy_decomposition(y, r);
    CHECK(std::abs(jy - (mean_term + spread_term)) <= 1e-10 * std::max(1.0, jy));
  }
}

TEST_CASE("state estimate mirrors the measurement and blends the shell") {
  Vec3 y;
  y << 20.0, 22.0, 24.0;
  coach::CoachState s = ddpc::estimate_state(y, 10.0);
  CHECK(s.t_room == y);
  CHECK(s.t_inv == y);
  CHECK(s.t_chassis == Vec3::Constant(16.0));
}

TEST_CASE("passive proxy clips the free-float forecast into the comfort band") {
  ddpc::DdpcConfig cfg = small_cfg();
  coach::ThermalParams params = coach::ThermalParams::defaults();
  coach::HeatDistribution dist;
  Eigen::VectorXd rule = Eigen::VectorXd::Constant(cfg.horizon + 1, 20.0);
  auto forecast = [](double) { return mild_weather(10.0); };

  // A hot coach in hot ambient air stays above the band over the horizon.
  auto hot_forecast = [](double) { return mild_weather(40.0); };
  Eigen::VectorXd hot = ddpc::compute_t_opt(ddpc::estimate_state(Vec3::Constant(40.0), 40.0),
                                            hot_forecast, 0.0, rule, cfg, params, dist, 300.0,
                                            10.0);
  REQUIRE(hot.size() == cfg.horizon + 1);
  for (long k = 0; k < hot.size(); ++k) CHECK(hot[k] == 22.0);

  // A freezing empty coach in freezing air pins the proxy to the lower edge.
  auto cold_forecast = [] (double) {
    coach::DisturbanceSample d = mild_weather(0.0);
    d.occupancy_pct = 0.0;
    return d;
  };
  Eigen::VectorXd cold = ddpc::compute_t_opt(ddpc::estimate_state(Vec3::Constant(0.0), 0.0),
                                             cold_forecast, 0.0, rule, cfg, params, dist, 300.0,
                                             10.0);
  for (long k = 0; k < cold.size(); ++k) CHECK(cold[k] == 18.0);

  // Inside the band the proxy is the free-float itself at step 0.
  Eigen::VectorXd mid = ddpc::compute_t_opt(ddpc::estimate_state(Vec3::Constant(20.5), 10.0),
                                            forecast, 0.0, rule, cfg, params, dist, 300.0, 10.0);
  CHECK(mid[0] == 20.5);

  CHECK_THROWS(ddpc::compute_t_opt(ddpc::estimate_state(Vec3::Constant(20.0), 10.0), forecast,
                                   0.0, Eigen::VectorXd::Zero(3), cfg, params, dist, 300.0,
                                   10.0));
  CHECK_THROWS(ddpc::compute_t_opt(ddpc::estimate_state(Vec3::Constant(20.0), 10.0), forecast,
                                   0.0, rule, cfg, params, dist, 300.0, 400.0));
}

TEST_CASE("an inner margin shrinks the working band but not the config band") {
  ddpc::DdpcConfig cfg = small_cfg();
  cfg.t_max = 2.0;
  cfg.t_max_inner = 0.25;
  CHECK(cfg.t_max_effective() == 1.75);
  coach::ThermalParams params = coach::ThermalParams::defaults();
  coach::HeatDistribution dist;
  Eigen::VectorXd rule = Eigen::VectorXd::Constant(cfg.horizon + 1, 20.0);
  auto forecast = [](double) { return mild_weather(10.0); };
  Eigen::VectorXd hot = ddpc::compute_t_opt(ddpc::estimate_state(Vec3::Constant(40.0), 10.0),
                                            forecast, 0.0, rule, cfg, params, dist, 300.0, 10.0);
  CHECK(hot[0] == 21.75);
}

TEST_CASE("optimizer config validation rejects broken settings") {
  auto broken = [](auto mutate) {
    ddpc::DdpcConfig c;
    mutate(c);
    return c;
  };
  CHECK_THROWS(broken([](ddpc::DdpcConfig& c) { c.rho = 0; }).validate());
  CHECK_THROWS(broken([](ddpc::DdpcConfig& c) { c.horizon = 0; }).validate());
  CHECK_THROWS(broken([](ddpc::DdpcConfig& c) { c.t_max = 0.0; }).validate());
  CHECK_THROWS(broken([](ddpc::DdpcConfig& c) { c.setpoint_band = -1.0; }).validate());
  CHECK_THROWS(broken([](ddpc::DdpcConfig& c) { c.delta_t_max = 0.0; }).validate());
  CHECK_THROWS(broken([](ddpc::DdpcConfig& c) { c.tau = 0.0; }).validate());
  CHECK_THROWS(broken([](ddpc::DdpcConfig& c) { c.t_max_inner = 2.0; }).validate());
  CHECK_NOTHROW(broken([](ddpc::DdpcConfig& c) {
                  c.delta_t_max = std::numeric_limits<double>::infinity();
                }).validate());
}

TEST_CASE("QP assembly wires the predictor blocks into the decision map") {
  std::mt19937_64 rng(72);
  ddpc::DdpcConfig cfg = small_cfg();
  predictor::PredictorModel model = small_model(cfg.rho, cfg.horizon, rng);
  const int T = cfg.horizon;

  Eigen::VectorXd z_p = testsupport::random_vector(model.zp_len(), rng);
  const long u0_col = kSlice * (cfg.rho - 1) + kNy;
  z_p[u0_col] = 0.0;
  Eigen::VectorXd d_f = testsupport::random_vector(kNd * T, rng);
  Eigen::VectorXd t_rule_f = Eigen::VectorXd::Constant(T + 1, 21.0);
  Eigen::VectorXd t_opt_f = Eigen::VectorXd::Constant(T + 1, 21.5);
  Vec3 y_now;
  y_now << 20.0, 21.0, 22.0;

  ddpc::OcpInstance inst =
      ddpc::assemble_qp(model, z_p, d_f, t_rule_f, t_opt_f, y_now, 21.0, true, cfg);

  REQUIRE(inst.G.rows() == kNy * T);
  REQUIRE(inst.G.cols() == T + 1);
  CHECK(Eigen::VectorXd(inst.G.col(0)) == Eigen::VectorXd(model.h_p().col(u0_col)));
  CHECK(Eigen::MatrixXd(inst.G.rightCols(T)) == Eigen::MatrixXd(model.h_u()));
  Eigen::VectorXd expect_c = model.h_p() * z_p + model.h_d() * d_f;
  CHECK(inst.c == expect_c);

  // The current input slot must be zeroed: it is a decision, not data.
  Eigen::VectorXd bad = z_p;
  bad[u0_col] = 1.0;
  CHECK_THROWS(ddpc::assemble_qp(model, bad, d_f, t_rule_f, t_opt_f, y_now, 21.0, true, cfg));

  // Dimension mismatches are rejected.
  ddpc::DdpcConfig wrong = cfg;
  wrong.rho = cfg.rho + 1;
  CHECK_THROWS(ddpc::assemble_qp(model, z_p, d_f, t_rule_f, t_opt_f, y_now, 21.0, true, wrong));
  CHECK_THROWS(ddpc::assemble_qp(model, z_p, Eigen::VectorXd::Zero(3), t_rule_f, t_opt_f, y_now,
                                 21.0, true, cfg));
}

TEST_CASE("dense QP has the documented shapes and a positive definite Hessian") {
  std::mt19937_64 rng(73);
  ddpc::DdpcConfig cfg = small_cfg();
  predictor::PredictorModel model = small_model(cfg.rho, cfg.horizon, rng);
  const int T = cfg.horizon;

  Eigen::VectorXd z_p = testsupport::random_vector(model.zp_len(), rng);
  z_p[kSlice * (cfg.rho - 1) + kNy] = 0.0;
  Eigen::VectorXd d_f = testsupport::random_vector(kNd * T, rng);
  Eigen::VectorXd t_rule_f = Eigen::VectorXd::Constant(T + 1, 21.0);
  Eigen::VectorXd t_opt_f = Eigen::VectorXd::Constant(T + 1, 21.0);
  Vec3 y_now = Vec3::Constant(21.0);

  ddpc::OcpInstance inst =
      ddpc::assemble_qp(model, z_p, d_f, t_rule_f, t_opt_f, y_now, 21.0, true, cfg);
  ddpc::DenseQp dq = ddpc::to_dense(inst);

  const int n = T + 1 + T;  // shared slack per step
  REQUIRE(dq.P.rows() == n);
  REQUIRE(dq.q.size() == n);
  // Rows: soft band (2*3T), slack sign (T), corridor (2(T+1)), rate (2T + 2).
  const int m = 2 * kNy * T + T + 2 * (T + 1) + 2 * T + 2;
  REQUIRE(dq.A.rows() == m);
  REQUIRE(dq.b.size() == m);

  CHECK((dq.P - dq.P.transpose()).lpNorm<Eigen::Infinity>() == 0.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dq.P);
  CHECK(es.eigenvalues().minCoeff() > 0.0);

  // Without a previous input and with an unbounded rate the rate rows vanish.
  ddpc::DdpcConfig free_cfg = cfg;
  free_cfg.delta_t_max = std::numeric_limits<double>::infinity();
  ddpc::OcpInstance inst2 =
      ddpc::assemble_qp(model, z_p, d_f, t_rule_f, t_opt_f, y_now, 0.0, false, free_cfg);
  ddpc::DenseQp dq2 = ddpc::to_dense(inst2);
  REQUIRE(dq2.A.rows() == 2 * kNy * T + T + 2 * (T + 1));

  // Per-deck slacks triple the slack block.
  ddpc::DdpcConfig deck_cfg = cfg;
  deck_cfg.eps_per_deck = true;
  ddpc::OcpInstance inst3 =
      ddpc::assemble_qp(model, z_p, d_f, t_rule_f, t_opt_f, y_now, 21.0, true, deck_cfg);
  CHECK(inst3.n_eps() == kNy * T);
  CHECK(ddpc::to_dense(inst3).P.rows() == T + 1 + kNy * T);
}

TEST_CASE("a zero-width corridor collapses the optimizer onto the rule curve") {
  std::mt19937_64 rng(74);
  ddpc::DdpcConfig cfg = small_cfg();
  cfg.setpoint_band = 0.0;
  cfg.delta_t_max = std::numeric_limits<double>::infinity();
  predictor::PredictorModel model = small_model(cfg.rho, cfg.horizon, rng);
  const int T = cfg.horizon;

  Eigen::VectorXd z_p = testsupport::random_vector(model.zp_len(), rng);
  z_p[kSlice * (cfg.rho - 1) + kNy] = 0.0;
  Eigen::VectorXd d_f = testsupport::random_vector(kNd * T, rng);
  Eigen::VectorXd t_rule_f(T + 1);
  for (int k = 0; k <= T; ++k) t_rule_f[k] = 20.0 + 0.3 * k;
  Eigen::VectorXd t_opt_f = t_rule_f;

  ddpc::OcpInstance inst =
      ddpc::assemble_qp(model, z_p, d_f, t_rule_f, t_opt_f, Vec3::Constant(20.0), 0.0, false, cfg);
  ddpc::OcpSolution sol = ddpc::solve_qp(inst);
  REQUIRE(sol.status == qp::Status::Optimal);
  CHECK((sol.u_star - t_rule_f).lpNorm<Eigen::Infinity>() < 1e-6);
}

TEST_CASE("solved instances carry small scaled optimality residuals") {
  std::mt19937_64 rng(75);
  ddpc::DdpcConfig cfg = small_cfg();
  predictor::PredictorModel model = small_model(cfg.rho, cfg.horizon, rng);
  const int T = cfg.horizon;
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::VectorXd z_p = testsupport::random_vector(model.zp_len(), rng);
    z_p[kSlice * (cfg.rho - 1) + kNy] = 0.0;
    Eigen::VectorXd d_f = testsupport::random_vector(kNd * T, rng);
    Eigen::VectorXd t_rule_f = Eigen::VectorXd::Constant(T + 1, 21.0);
    Eigen::VectorXd t_opt_f = Eigen::VectorXd::Constant(T + 1, 21.3);
    ddpc::OcpInstance inst = ddpc::assemble_qp(model, z_p, d_f, t_rule_f, t_opt_f,
                                               Vec3::Constant(21.0), 21.0, true, cfg);
    ddpc::OcpSolution sol = ddpc::solve_qp(inst);
    REQUIRE(sol.status == qp::Status::Optimal);
    CHECK(sol.stationarity <= 1e-6);
    CHECK(sol.primal_infeas <= 1e-6);
    CHECK(sol.complementarity <= 1e-6);
    CHECK(sol.y_star == Eigen::VectorXd(inst.c + inst.G * sol.u_star));
  }
}

TEST_CASE("history keeps the newest window and zeroes the pending input slot") {
  ddpc::History hist(3);
  CHECK(hist.completed() == 0);
  CHECK(!hist.ready());
  CHECK_THROWS(hist.z_p_fixed(Vec3::Zero(), Vec5::Zero()));

  for (int i = 1; i <= 5; ++i) {
    hist.push(Vec3::Constant(double(i)), 100.0 + i, Vec5::Constant(10.0 * i));
  }
  CHECK(hist.completed() == 3);  // capped at rho
  CHECK(hist.ready());

  Vec3 y_now = Vec3::Constant(99.0);
  Vec5 d_now = Vec5::Constant(7.0);
  Eigen::VectorXd z = hist.z_p_fixed(y_now, d_now);
  REQUIRE(z.size() == kSlice * 3);

  // Slices: two most recent completed periods (4, 5), then the current one.
  CHECK(Vec3(z.segment(0, 3)) == Vec3::Constant(4.0));
  CHECK(z[3] == 104.0);
  CHECK(Vec5(z.segment(4, 5)) == Vec5::Constant(40.0));
  CHECK(Vec3(z.segment(9, 3)) == Vec3::Constant(5.0));
  CHECK(z[12] == 105.0);
  CHECK(Vec5(z.segment(13, 5)) == Vec5::Constant(50.0));
  CHECK(Vec3(z.segment(18, 3)) == y_now);
  CHECK(z[21] == 0.0);  // the pending input is a decision
  CHECK(Vec5(z.segment(22, 5)) == d_now);

  CHECK_THROWS(ddpc::History(0));
}

TEST_CASE("disturbance vector projects weather into predictor coordinates") {
  coach::DisturbanceSample d = mild_weather(12.0);
  d.q_g_w_per_m2 = 500.0;
  d.alpha_rad = std::numbers::pi / 6.0;
  d.beta_rad = std::numbers::pi / 2.0;
  d.theta_rad = 0.0;
  Vec5 v = ddpc::disturbance_vector(d);
  CHECK(v[0] == 12.0);
  CHECK(v[1] == Approx(433.0127018922193).margin(1e-9));
  CHECK(v[2] == Approx(250.0).margin(1e-9));
  CHECK(v[3] == 0.3);
  CHECK(v[4] == 10.0);
}

TEST_CASE("controller warms up on the rule curve and then optimizes") {
  std::mt19937_64 rng(76);
  ddpc::Controller::Dependencies deps;
  deps.cfg = small_cfg();
  deps.model = small_model(deps.cfg.rho, deps.cfg.horizon, rng);
  deps.rule = hvac::RuleTable::defaults();
  deps.sim_params = coach::ThermalParams::defaults();
  ddpc::Controller ctrl(deps);

  auto forecast = [](double) { return mild_weather(10.0); };
  const double rule_at_10 = deps.rule(10.0);
  CHECK(rule_at_10 == 21.5);

  Vec3 y = Vec3::Constant(21.0);
  for (int k = 0; k < deps.cfg.rho; ++k) {
    CHECK(!ctrl.warmed_up());
    double u = ctrl.step(300.0 * k, y, mild_weather(10.0), forecast);
    CHECK(u == rule_at_10);
    CHECK(ctrl.log().back().warmup);
  }
  CHECK(ctrl.warmed_up());

  for (int k = deps.cfg.rho; k < 20; ++k) {
    double u = ctrl.step(300.0 * k, y, mild_weather(10.0), forecast);
    const auto& rec = ctrl.log().back();
    CHECK(!rec.warmup);
    CHECK(!rec.fallback);
    CHECK(rec.status == qp::Status::Optimal);
    CHECK(rec.u_star == u);
    CHECK(rec.stationarity <= 1e-6);
    CHECK(rec.primal_infeas <= 1e-6);
    CHECK(rec.complementarity <= 1e-6);
  }
  CHECK(ctrl.log().size() == 20);

  // With a constant rule both applied-input boxes hold exactly at every step.
  double u_prev = 0.0;
  bool has_prev = false;
  for (const auto& rec : ctrl.log()) {
    CHECK(std::abs(rec.u_star - rec.t_rule) <= deps.cfg.setpoint_band);
    if (has_prev) CHECK(std::abs(rec.u_star - u_prev) <= deps.cfg.delta_t_max);
    u_prev = rec.u_star;
    has_prev = true;
  }
}

TEST_CASE("controller runs are deterministic") {
  std::mt19937_64 rng(77);
  ddpc::Controller::Dependencies deps;
  deps.cfg = small_cfg();
  deps.model = small_model(deps.cfg.rho, deps.cfg.horizon, rng);
  deps.rule = hvac::RuleTable::defaults();
  deps.sim_params = coach::ThermalParams::defaults();

  ddpc::Controller a(deps);
  ddpc::Controller b(deps);
  auto forecast = [](double t) { return mild_weather(10.0 + 2.0 * std::sin(t / 3600.0)); };

  std::mt19937_64 meas_rng(78);
  std::normal_distribution<double> noise(0.0, 0.3);
  for (int k = 0; k < 15; ++k) {
    Vec3 y = Vec3::Constant(21.0);
    for (int i = 0; i < 3; ++i) y[i] += noise(meas_rng);
    coach::DisturbanceSample d = forecast(300.0 * k);
    double ua = a.step(300.0 * k, y, d, forecast);
    double ub = b.step(300.0 * k, y, d, forecast);
    CHECK(ua == ub);
  }
}

TEST_CASE("controller rejects mismatched model dimensions") {
  std::mt19937_64 rng(79);
  ddpc::Controller::Dependencies deps;
  deps.cfg = small_cfg();
  deps.model = small_model(deps.cfg.rho + 1, deps.cfg.horizon, rng);
  deps.rule = hvac::RuleTable::defaults();
  deps.sim_params = coach::ThermalParams::defaults();
  CHECK_THROWS(ddpc::Controller(deps));
}
