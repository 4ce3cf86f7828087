#pragma once

// Dense convex quadratic programming:
//
//   minimize    0.5 x' P x + q' x
//   subject to  A x <= b
//
// solved with a Mehrotra predictor-corrector primal-dual interior point
// method. Problem sizes here are small (tens of variables, up to a few
// hundred rows), so each iteration factors the condensed normal-equations
// matrix P + A' diag(z/s) A with a dense LDLT. The solver reports scaled KKT
// residuals so callers can assert solution quality.

#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Dense>

namespace railtherm::qp {

enum class Status { Optimal, MaxIter, Infeasible };

inline const char* to_string(Status s) {
  switch (s) {
    case Status::Optimal: return "optimal";
    case Status::MaxIter: return "max_iter";
    case Status::Infeasible: return "infeasible";
  }
  return "?";
}

struct Options {
  int max_iter = 100;
  double tol = 1e-9;          // scaled residual + duality-gap target
  double step_fraction = 0.995;  // fraction-to-boundary
};

struct Result {
  Status status = Status::MaxIter;
  Eigen::VectorXd x;
  Eigen::VectorXd z;  // inequality multipliers (>= 0)
  Eigen::VectorXd s;  // slacks b - Ax (>= 0)
  int iterations = 0;
  double objective = std::numeric_limits<double>::quiet_NaN();

  // Scaled KKT residuals at the returned point.
  double stationarity = std::numeric_limits<double>::infinity();
  double primal_infeas = std::numeric_limits<double>::infinity();
  double dual_infeas = std::numeric_limits<double>::infinity();
  double complementarity = std::numeric_limits<double>::infinity();
};

namespace detail {

inline double max_step(const Eigen::VectorXd& v, const Eigen::VectorXd& dv) {
  double a = 1.0;
  for (long i = 0; i < v.size(); ++i) {
    if (dv[i] < 0.0) a = std::min(a, -v[i] / dv[i]);
  }
  return a;
}

}  // namespace detail

inline Result solve(const Eigen::MatrixXd& P, const Eigen::VectorXd& q, const Eigen::MatrixXd& A,
                    const Eigen::VectorXd& b, const Options& opt = Options{}) {
  const long n = P.rows();
  const long m = A.rows();
  if (P.cols() != n || q.size() != n) throw std::runtime_error("qp: P/q dimensions disagree");
  if (m != b.size() || (m > 0 && A.cols() != n)) {
    throw std::runtime_error("qp: A/b dimensions disagree");
  }

  const Eigen::MatrixXd Ps = 0.5 * (P + P.transpose());
  Result res;

  auto fill_quality = [&](const Eigen::VectorXd& x, const Eigen::VectorXd& z,
                          const Eigen::VectorXd& s) {
    const double scale_d = std::max(1.0, q.lpNorm<Eigen::Infinity>());
    const double scale_p = std::max(1.0, m > 0 ? b.lpNorm<Eigen::Infinity>() : 0.0);
    Eigen::VectorXd rd = Ps * x + q;
    if (m > 0) rd += A.transpose() * z;
    res.stationarity = rd.lpNorm<Eigen::Infinity>() / scale_d;
    if (m > 0) {
      Eigen::VectorXd viol = A * x - b;
      res.primal_infeas = std::max(0.0, viol.maxCoeff()) / scale_p;
      res.dual_infeas = std::max(0.0, -z.minCoeff()) / scale_d;
      res.complementarity = std::abs(z.dot(s)) / static_cast<double>(m);
      res.complementarity /= std::max(1.0, std::abs(res.objective));
    } else {
      res.primal_infeas = 0.0;
      res.dual_infeas = 0.0;
      res.complementarity = 0.0;
    }
  };

  // Unconstrained case: a single linear solve.
  if (m == 0) {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(Ps);
    if (ldlt.info() != Eigen::Success) throw std::runtime_error("qp: P is not factorizable");
    res.x = ldlt.solve(-q);
    res.z.resize(0);
    res.s.resize(0);
    res.objective = 0.5 * res.x.dot(Ps * res.x) + q.dot(res.x);
    res.status = res.x.allFinite() ? Status::Optimal : Status::MaxIter;
    fill_quality(res.x, res.z, res.s);
    return res;
  }

  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd s(m), z(m);
  for (long i = 0; i < m; ++i) s[i] = std::max(1.0, b[i]);
  z.setOnes();

  const double scale_d = std::max(1.0, q.lpNorm<Eigen::Infinity>());
  const double scale_p = std::max(1.0, b.lpNorm<Eigen::Infinity>());

  for (int iter = 0; iter < opt.max_iter; ++iter) {
    res.iterations = iter + 1;
    const Eigen::VectorXd rd = Ps * x + q + A.transpose() * z;
    const Eigen::VectorXd rp = A * x + s - b;
    const double mu = s.dot(z) / static_cast<double>(m);
    const double obj = 0.5 * x.dot(Ps * x) + q.dot(x);

    const bool ok_d = rd.lpNorm<Eigen::Infinity>() / scale_d <= opt.tol;
    const bool ok_p = rp.lpNorm<Eigen::Infinity>() / scale_p <= opt.tol;
    const bool ok_c = mu <= opt.tol * std::max(1.0, std::abs(obj));
    if (ok_d && ok_p && ok_c) {
      res.status = Status::Optimal;
      break;
    }
    // Divergence heuristics: the iterates only blow up when no primal
    // feasible point exists (the duality measure still collapses).
    if (z.lpNorm<Eigen::Infinity>() > 1e12 ||
        (mu <= 1e-12 && rp.lpNorm<Eigen::Infinity>() / scale_p > 1e-6)) {
      res.status = Status::Infeasible;
      break;
    }

    const Eigen::ArrayXd w = z.array() / s.array();
    Eigen::MatrixXd M = Ps;
    M.noalias() += A.transpose() * w.matrix().asDiagonal() * A;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(M);
    if (ldlt.info() != Eigen::Success) {
      res.status = Status::MaxIter;
      break;
    }

    auto solve_direction = [&](const Eigen::VectorXd& rc) {
      // g = S^-1 (rc - Z rp); dx from the condensed system; then dz, ds.
      Eigen::VectorXd g = (rc.array() - z.array() * rp.array()) / s.array();
      Eigen::VectorXd dx = ldlt.solve(-rd + A.transpose() * g);
      Eigen::VectorXd ds = -rp - A * dx;
      Eigen::VectorXd dz = (-rc.array() - z.array() * ds.array()) / s.array();
      return std::make_tuple(dx, ds, dz);
    };

    // Predictor (affine scaling) direction.
    Eigen::VectorXd rc_aff = (s.array() * z.array()).matrix();
    auto [dx_a, ds_a, dz_a] = solve_direction(rc_aff);
    const double ap_aff = detail::max_step(s, ds_a);
    const double ad_aff = detail::max_step(z, dz_a);
    const double mu_aff = (s + ap_aff * ds_a).dot(z + ad_aff * dz_a) / static_cast<double>(m);
    const double ratio = mu_aff / std::max(mu, 1e-300);
    const double sigma = std::min(1.0, ratio * ratio * ratio);

    // Corrector with centering.
    Eigen::VectorXd rc =
        (s.array() * z.array() + ds_a.array() * dz_a.array() - sigma * mu).matrix();
    auto [dx, ds, dz] = solve_direction(rc);

    const double ap = std::min(1.0, opt.step_fraction * detail::max_step(s, ds));
    const double ad = std::min(1.0, opt.step_fraction * detail::max_step(z, dz));
    x += ap * dx;
    s += ap * ds;
    z += ad * dz;

    if (!x.allFinite() || !s.allFinite() || !z.allFinite()) {
      res.status = Status::MaxIter;
      break;
    }
  }

  res.x = x;
  res.s = s;
  res.z = z;
  res.objective = 0.5 * x.dot(Ps * x) + q.dot(x);
  fill_quality(x, z, s);
  return res;
}

}  // namespace railtherm::qp
