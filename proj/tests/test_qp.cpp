// Dense convex QP solver: analytic solutions, enumeration cross-checks,
// KKT residual quality, and infeasibility detection.

#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "railtherm/qp.hpp"
#include "support/oracles.hpp"

using namespace railtherm;
using Catch::Approx;

TEST_CASE("unconstrained minimum solves the normal equations") {
  std::mt19937_64 rng(61);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 2 + trial;
    Eigen::MatrixXd P = testsupport::random_spd(n, rng);
    Eigen::VectorXd q = testsupport::random_vector(n, rng);
    qp::Result res = qp::solve(P, q, Eigen::MatrixXd(0, n), Eigen::VectorXd(0));
    REQUIRE(res.status == qp::Status::Optimal);
    Eigen::VectorXd expect = P.ldlt().solve(-q);
    CHECK((res.x - expect).lpNorm<Eigen::Infinity>() < 1e-9);
  }
}

TEST_CASE("active box constraints pin the solution to the bound") {
  // minimize 0.5*||x - c||^2 with x <= b elementwise and c > b: x* = b.
  const int n = 4;
  Eigen::MatrixXd P = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd c = Eigen::VectorXd::Constant(n, 5.0);
  Eigen::VectorXd q = -c;
  Eigen::MatrixXd A = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd b = Eigen::VectorXd::Constant(n, 2.0);

  qp::Result res = qp::solve(P, q, A, b);
  REQUIRE(res.status == qp::Status::Optimal);
  CHECK((res.x - b).lpNorm<Eigen::Infinity>() < 1e-7);
  CHECK(res.objective == Approx(0.5 * n * 4.0 - n * 10.0).margin(1e-6));
}

TEST_CASE("inactive constraints leave the unconstrained optimum untouched") {
  const int n = 3;
  Eigen::MatrixXd P = 2.0 * Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd q = Eigen::VectorXd::Constant(n, -2.0);  // optimum at 1.0
  Eigen::MatrixXd A = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd b = Eigen::VectorXd::Constant(n, 100.0);
  qp::Result res = qp::solve(P, q, A, b);
  REQUIRE(res.status == qp::Status::Optimal);
  CHECK((res.x - Eigen::VectorXd::Constant(n, 1.0)).lpNorm<Eigen::Infinity>() < 1e-8);
}

TEST_CASE("a pair of opposing tight rows acts as an equality") {
  // x0 + x1 <= 1 and -(x0 + x1) <= -1 force x0 + x1 = 1.
  Eigen::MatrixXd P = Eigen::MatrixXd::Identity(2, 2);
  Eigen::VectorXd q = Eigen::VectorXd::Zero(2);
  Eigen::MatrixXd A(2, 2);
  A << 1.0, 1.0, -1.0, -1.0;
  Eigen::VectorXd b(2);
  b << 1.0, -1.0;
  qp::Result res = qp::solve(P, q, A, b);
  REQUIRE(res.status == qp::Status::Optimal);
  CHECK(res.x[0] == Approx(0.5).margin(1e-7));
  CHECK(res.x[1] == Approx(0.5).margin(1e-7));
}

TEST_CASE("random feasible programs match the enumeration oracle") {
  std::mt19937_64 rng(62);
  std::uniform_int_distribution<int> np(2, 8);
  std::uniform_int_distribution<int> mp(1, 10);
  for (int trial = 0; trial < 12; ++trial) {
    testsupport::RandomQp inst = testsupport::random_feasible_qp(np(rng), mp(rng), rng);
    testsupport::EnumQpResult oracle = testsupport::enumerate_qp(inst.P, inst.q, inst.A, inst.b);
    REQUIRE(oracle.found);

    qp::Result res = qp::solve(inst.P, inst.q, inst.A, inst.b);
    REQUIRE(res.status == qp::Status::Optimal);
    CHECK((res.x - oracle.x).lpNorm<Eigen::Infinity>() < 1e-6);
    CHECK(res.objective == Approx(oracle.objective).margin(1e-6));

    // Scaled KKT residuals come back small on solved instances.
    CHECK(res.stationarity < 1e-6);
    CHECK(res.primal_infeas < 1e-6);
    CHECK(res.complementarity < 1e-6);
  }
}

TEST_CASE("duplicated rows do not break optimality") {
  Eigen::MatrixXd P = Eigen::MatrixXd::Identity(2, 2);
  Eigen::VectorXd q(2);
  q << -4.0, 0.0;
  Eigen::MatrixXd A(3, 2);
  A << 1.0, 0.0, 1.0, 0.0, 0.0, 1.0;  // x0 <= 1 stated twice
  Eigen::VectorXd b(3);
  b << 1.0, 1.0, 5.0;
  qp::Result res = qp::solve(P, q, A, b);
  REQUIRE(res.status == qp::Status::Optimal);
  CHECK(res.x[0] == Approx(1.0).margin(1e-6));
  CHECK(res.x[1] == Approx(0.0).margin(1e-7));
}

TEST_CASE("an empty feasible set is reported as infeasible") {
  // x <= 0 and -x <= -1 cannot both hold.
  Eigen::MatrixXd P = Eigen::MatrixXd::Identity(1, 1);
  Eigen::VectorXd q = Eigen::VectorXd::Zero(1);
  Eigen::MatrixXd A(2, 1);
  A << 1.0, -1.0;
  Eigen::VectorXd b(2);
  b << 0.0, -1.0;
  qp::Result res = qp::solve(P, q, A, b);
  CHECK(res.status == qp::Status::Infeasible);
}

TEST_CASE("solver validates input shapes") {
  Eigen::MatrixXd P = Eigen::MatrixXd::Identity(2, 2);
  Eigen::VectorXd q = Eigen::VectorXd::Zero(3);  // wrong size
  CHECK_THROWS(qp::solve(P, q, Eigen::MatrixXd(0, 2), Eigen::VectorXd(0)));
}

TEST_CASE("status strings are stable") {
  CHECK(std::string(qp::to_string(qp::Status::Optimal)) == "optimal");
  CHECK(std::string(qp::to_string(qp::Status::MaxIter)) == "max_iter");
  CHECK(std::string(qp::to_string(qp::Status::Infeasible)) == "infeasible");
}
