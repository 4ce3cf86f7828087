// Multistep predictor identification: LQ factorization, least-squares
// equivalence, causal structure, exactness on linear systems, persistence.

#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "railtherm/transient_predictor.hpp"
#include "support/oracles.hpp"

using namespace railtherm;
using Catch::Approx;
using testsupport::rel_frob;

TEST_CASE("LQ factorization reconstructs the input with a canonical triangle") {
  std::mt19937_64 rng(51);
  for (int trial = 0; trial < 10; ++trial) {
    const int r = 10 + trial, n = 40 + 3 * trial;
    Eigen::MatrixXd z = testsupport::random_matrix(r, n, rng);
    predictor::LqResult lq = predictor::lq_decompose(z, /*want_q=*/true);

    // Lower triangular with nonnegative diagonal.
    for (int i = 0; i < r; ++i) {
      CHECK(lq.L(i, i) >= 0.0);
      for (int j = i + 1; j < r; ++j) CHECK(lq.L(i, j) == 0.0);
    }
    CHECK(lq.min_abs_diag == lq.L.diagonal().cwiseAbs().minCoeff());
    CHECK(lq.frob_norm == Approx(z.norm()));

    // Q has orthonormal rows; L Q reproduces the input.
    CHECK(rel_frob(lq.Q * lq.Q.transpose(), Eigen::MatrixXd::Identity(r, r)) < 1e-12);
    CHECK(rel_frob(lq.L * lq.Q, z) < 1e-12);
    // Gram identity: Z Z^T = L L^T.
    CHECK(rel_frob(lq.L * lq.L.transpose(), z * z.transpose()) < 1e-12);
  }
  CHECK_THROWS(predictor::lq_decompose(testsupport::random_matrix(5, 4, rng)));
}

TEST_CASE("triangular fit equals block-wise least squares on full-rank data") {
  std::mt19937_64 rng(52);
  const int rho = 3, T = 4;
  pipeline::HankelSet hs = testsupport::random_hankel_set(rho, T, 150, rng);
  predictor::PredictorModel m = predictor::fit(hs);
  CHECK_FALSE(m.meta.regularized);

  Eigen::MatrixXd oracle = testsupport::blockwise_ls_predictor(hs);
  CHECK(rel_frob(m.phi, oracle) < 1e-10);
}

TEST_CASE("fitted maps carry the causal zero pattern bitwise") {
  std::mt19937_64 rng(53);
  const int rho = 4, T = 5;
  pipeline::HankelSet hs = testsupport::random_hankel_set(rho, T, 200, rng);
  predictor::PredictorModel m = predictor::fit(hs);
  m.validate();  // enforces the structural zeros internally

  const int slice = pipeline::kSlice;
  for (int j = 1; j <= T; ++j) {
    const int r0 = 3 * (j - 1);
    // One-step map: block j sees nothing from its own slice onward.
    const long cut = static_cast<long>(slice) * (rho + j - 1);
    CHECK(m.phi.block(r0, cut, 3, m.phi.cols() - cut).cwiseAbs().maxCoeff() == 0.0);
    // Multistep maps: strictly block-lower in future inputs and disturbances.
    CHECK(m.h_u().block(r0, j - 1, 3, T - (j - 1)).cwiseAbs().maxCoeff() == 0.0);
    CHECK(m.h_d().block(r0, 5 * (j - 1), 3, 5 * (T - (j - 1))).cwiseAbs().maxCoeff() == 0.0);
  }

  // Corrupting the structure makes validation fail.
  predictor::PredictorModel bad = m;
  bad.h.block(0, bad.zp_len() + 1, 1, 1).array() += 1.0;  // step 1 touching u_f[1]
  CHECK_THROWS(bad.validate());
}

TEST_CASE("prediction ignores inputs at or beyond each step") {
  std::mt19937_64 rng(54);
  const int rho = 4, T = 6;
  pipeline::HankelSet hs = testsupport::random_hankel_set(rho, T, 220, rng);
  predictor::PredictorModel m = predictor::fit(hs);

  Eigen::VectorXd z_p = testsupport::random_vector(m.zp_len(), rng);
  Eigen::VectorXd u_f = testsupport::random_vector(T, rng);
  Eigen::VectorXd d_f = testsupport::random_vector(5 * T, rng);
  Eigen::VectorXd base = predictor::predict(m, z_p, u_f, d_f);

  for (int j = 1; j <= T; ++j) {
    Eigen::VectorXd u2 = u_f;
    Eigen::VectorXd d2 = d_f;
    // Perturb everything from step j onward (0-based index j-1).
    for (int k = j - 1; k < T; ++k) {
      u2[k] += 100.0;
      d2.segment(5 * k, 5).array() -= 55.0;
    }
    Eigen::VectorXd pert = predictor::predict(m, z_p, u2, d2);
    // Steps 1..j are bit-identical; step j+1 (if any) must react.
    CHECK(pert.head(3 * j) == base.head(3 * j));
    if (j < T) CHECK(pert.segment(3 * j, 3) != base.segment(3 * j, 3));
  }
}

TEST_CASE("noiseless linear-system data is reproduced to machine precision") {
  std::mt19937_64 rng(55);
  const int rho = 4, T = 6;
  testsupport::LtiSystem sys = testsupport::random_stable_lti(3, rng);
  pipeline::Trajectory train = testsupport::simulate_lti(sys, 400, rng, 0);
  pipeline::HankelSet hs = pipeline::build_hankel({train}, rho, T);
  predictor::PredictorModel m = predictor::fit(hs);

  // Deterministic data lives on a low-dimensional subspace: the fit must
  // take the regularized route and still predict essentially exactly.
  CHECK(m.meta.regularized);

  pipeline::Trajectory test = testsupport::simulate_lti(sys, 80, rng, 1);
  predictor::MaeReport rep = predictor::evaluate_mae(m, {test});
  CHECK(rep.per_step.size() == T);
  CHECK(rep.per_step.maxCoeff() < 1e-6);
  CHECK(rep.overall < 1e-6);
  CHECK(rep.windows == 80 - rho - T + 1);
}

TEST_CASE("model save/load round trip is bit-exact") {
  std::mt19937_64 rng(56);
  testsupport::TempDir tmp("model");
  pipeline::HankelSet hs = testsupport::random_hankel_set(3, 4, 120, rng);
  predictor::PredictorModel m = predictor::fit(hs);

  predictor::save_model(m, tmp.file("m.txt"));
  predictor::PredictorModel back = predictor::load_model(tmp.file("m.txt"));
  CHECK(back.rho == m.rho);
  CHECK(back.horizon == m.horizon);
  CHECK(back.phi == m.phi);
  CHECK(back.h == m.h);
  CHECK(back.meta.n_cols == m.meta.n_cols);
  CHECK(back.meta.regularized == m.meta.regularized);
  CHECK(back.meta.lambda == m.meta.lambda);
  CHECK(back.meta.min_abs_diag == m.meta.min_abs_diag);
  CHECK(back.meta.data_digest == m.meta.data_digest);

  CHECK_THROWS(predictor::load_model(tmp.file("missing.txt")));
}

TEST_CASE("training-data digest is stable and discriminating") {
  std::mt19937_64 rng(57);
  pipeline::HankelSet hs = testsupport::random_hankel_set(3, 3, 100, rng);
  predictor::PredictorModel a = predictor::fit(hs);
  predictor::PredictorModel b = predictor::fit(hs);
  CHECK(a.meta.data_digest == b.meta.data_digest);
  CHECK(a.phi == b.phi);

  pipeline::HankelSet other = testsupport::random_hankel_set(3, 3, 100, rng);
  predictor::PredictorModel c = predictor::fit(other);
  CHECK(c.meta.data_digest != a.meta.data_digest);
}

TEST_CASE("fit and evaluation reject undersized data") {
  std::mt19937_64 rng(58);
  // Too few columns for the row count.
  pipeline::HankelSet hs = testsupport::random_hankel_set(3, 3, 30, rng);
  CHECK_THROWS(predictor::fit(hs));

  pipeline::HankelSet ok = testsupport::random_hankel_set(3, 3, 80, rng);
  predictor::PredictorModel m = predictor::fit(ok);
  // Trajectory shorter than rho + T admits no validation window.
  pipeline::Trajectory tiny = testsupport::simulate_lti(testsupport::random_stable_lti(2, rng),
                                                        5, rng);
  CHECK_THROWS(predictor::evaluate_mae(m, {tiny}));
}
