#pragma once

// Multistep linear predictor identified directly from Hankel data matrices.
//
// Given the stacked window matrix Z (rho past slices, then T future slices,
// each slice [y; u; d]), an LQ factorization Z = L Q orders every channel of
// every time step triangularly: the rows of L belonging to a future output
// block j expose exactly how y(t+j) correlates with everything that comes
// before it in time. Regressing those rows on all earlier rows (and zeroing
// each block's own diagonal contribution) yields a one-step-ahead map phi;
// eliminating the inter-step output couplings turns it into the explicit
// multistep form
//
//   y_f = H_p z_p + H_u u_f + H_d d_f
//
// whose blocks are strictly causal: step j of the prediction never touches
// inputs or disturbances at or after time t+j.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/QR>

#include "railtherm/csv.hpp"
#include "railtherm/data_pipeline.hpp"
#include "railtherm/types.hpp"

namespace railtherm::predictor {

using pipeline::kNd;
using pipeline::kNu;
using pipeline::kNy;
using pipeline::kSlice;

// ---------------------------------------------------------------------------
// LQ factorization
// ---------------------------------------------------------------------------

struct LqResult {
  Eigen::MatrixXd L;  // r x r lower triangular, nonnegative diagonal
  Eigen::MatrixXd Q;  // r x N with orthonormal rows (empty when not requested)
  double min_abs_diag = 0.0;
  double frob_norm = 0.0;  // of the input matrix
};

// Z = L Q via a Householder QR of Z^T. Column signs are flipped so the
// diagonal of L is nonnegative, which makes the factorization unique for
// full-rank input. Computing Q costs O(N r^2) and is only needed by
// reconstruction checks, so it is optional.
inline LqResult lq_decompose(const Eigen::MatrixXd& Z, bool want_q = true) {
  const long r = Z.rows();
  const long n = Z.cols();
  if (r == 0 || n < r) {
    throw std::runtime_error("predictor: LQ needs at least as many columns as rows");
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(Z.transpose());
  LqResult out;
  out.frob_norm = Z.norm();
  Eigen::MatrixXd R = qr.matrixQR().topRows(r).triangularView<Eigen::Upper>();
  out.L = R.transpose();
  Eigen::VectorXd sign(r);
  for (long i = 0; i < r; ++i) {
    sign[i] = out.L(i, i) < 0.0 ? -1.0 : 1.0;
    if (sign[i] < 0.0) out.L.col(i) *= -1.0;
  }
  out.min_abs_diag = out.L.diagonal().cwiseAbs().minCoeff();
  if (want_q) {
    out.Q = (qr.householderQ() * Eigen::MatrixXd::Identity(n, r)).transpose();
    for (long i = 0; i < r; ++i) {
      if (sign[i] < 0.0) out.Q.row(i) *= -1.0;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

struct PredictorModel {
  int rho = 0;
  int horizon = 0;

  // One-step correlation map: future output block j as a function of
  // [z_p; slice_1; ...; slice_T], strictly block lower triangular over the
  // future slices.
  Eigen::MatrixXd phi;  // (kNy*horizon) x (kSlice*(rho+horizon))

  // Explicit multistep predictor [H_p | H_u | H_d].
  Eigen::MatrixXd h;  // (kNy*horizon) x (kSlice*rho + kNu*horizon + kNd*horizon)

  struct Meta {
    long n_cols = 0;           // Hankel columns used for the fit
    bool regularized = false;  // rank-deficient path taken
    double lambda = 0.0;
    double min_abs_diag = 0.0;
    std::uint64_t data_digest = 0;
  } meta;

  int ny_rows() const { return kNy * horizon; }
  int zp_len() const { return kSlice * rho; }

  Eigen::Ref<const Eigen::MatrixXd> h_p() const { return h.leftCols(zp_len()); }
  Eigen::Ref<const Eigen::MatrixXd> h_u() const { return h.middleCols(zp_len(), kNu * horizon); }
  Eigen::Ref<const Eigen::MatrixXd> h_d() const { return h.rightCols(kNd * horizon); }

  void validate() const {
    if (rho < 1 || horizon < 1) throw std::runtime_error("predictor: invalid model dimensions");
    if (phi.rows() != ny_rows() || phi.cols() != kSlice * (rho + horizon)) {
      throw std::runtime_error("predictor: phi has wrong shape");
    }
    if (h.rows() != ny_rows() || h.cols() != zp_len() + (kNu + kNd) * horizon) {
      throw std::runtime_error("predictor: h has wrong shape");
    }
    if (!phi.allFinite() || !h.allFinite()) {
      throw std::runtime_error("predictor: model holds non-finite entries");
    }
    // Strict causality patterns.
    for (int j = 1; j <= horizon; ++j) {
      int r0 = kNy * (j - 1);
      if (phi.block(r0, kSlice * (rho + j - 1), kNy, phi.cols() - kSlice * (rho + j - 1))
              .cwiseAbs()
              .maxCoeff() != 0.0) {
        throw std::runtime_error("predictor: phi violates causality in block " + std::to_string(j));
      }
      auto hu = h_u();
      if (j - 1 < horizon &&
          hu.block(r0, j - 1, kNy, horizon - (j - 1)).cwiseAbs().maxCoeff() != 0.0) {
        throw std::runtime_error("predictor: H_u violates causality in block " + std::to_string(j));
      }
      auto hd = h_d();
      if (kNd * (j - 1) < hd.cols() &&
          hd.block(r0, kNd * (j - 1), kNy, hd.cols() - kNd * (j - 1)).cwiseAbs().maxCoeff() !=
              0.0) {
        throw std::runtime_error("predictor: H_d violates causality in block " + std::to_string(j));
      }
    }
  }
};

// ---------------------------------------------------------------------------
// Fit
// ---------------------------------------------------------------------------

inline constexpr double kRankTolRel = 1e-12;  // relative min-diagonal threshold
// Pivot cutoff (relative to the largest pivot) for the rank-truncated solves
// on the deficient path: well above factorization noise (~1e-13 relative),
// well below any direction the data actually excites.
inline constexpr double kMinNormPivotRel = 1e-9;

inline std::uint64_t fnv1a_digest(const Eigen::MatrixXd& m, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (long c = 0; c < m.cols(); ++c) {
    for (long r = 0; r < m.rows(); ++r) {
      double v = m(r, c);
      unsigned char bytes[sizeof(double)];
      std::memcpy(bytes, &v, sizeof(double));
      for (unsigned char b : bytes) {
        h ^= b;
        h *= 1099511628211ULL;
      }
    }
  }
  return h;
}

inline PredictorModel fit(const pipeline::HankelSet& hs) {
  const int rho = hs.rho;
  const int T = hs.horizon;
  const long r = kSlice * (rho + T);
  if (hs.Z.rows() != r) throw std::runtime_error("predictor: Hankel row count mismatch");
  if (hs.Z.cols() < r) {
    throw std::runtime_error("predictor: need at least " + std::to_string(r) +
                             " Hankel columns, got " + std::to_string(hs.Z.cols()));
  }

  LqResult lq = lq_decompose(hs.Z, /*want_q=*/false);
  const Eigen::MatrixXd& L = lq.L;

  // Future output rows of L with each block's own slice contribution zeroed.
  Eigen::MatrixXd l0y(kNy * T, r);
  for (int j = 1; j <= T; ++j) {
    const long row = kSlice * rho + kSlice * (j - 1);
    l0y.middleRows(kNy * (j - 1), kNy) = L.middleRows(row, kNy);
    l0y.block(kNy * (j - 1), row, kNy, kSlice).setZero();
  }

  PredictorModel m;
  m.rho = rho;
  m.horizon = T;
  m.meta.n_cols = hs.Z.cols();
  m.meta.min_abs_diag = lq.min_abs_diag;

  const bool deficient = lq.min_abs_diag < kRankTolRel * lq.frob_norm;
  Eigen::MatrixXd phi;
  if (!deficient) {
    // phi L = l0y  <=>  L^T phi^T = l0y^T.
    phi = L.transpose()
              .triangularView<Eigen::Upper>()
              .solve(l0y.transpose())
              .transpose();
  } else {
    // Rank-deficient data (noiseless or short on excitation). A global
    // pseudoinverse would spread weight onto rows of L that sit at or after
    // each block's own slice, and zeroing those entries afterwards would break
    // the fitted relation. Instead, solve each block against only the leading
    // principal submatrix of L it is allowed to touch: the restricted system
    // is still consistent (the underlying relation uses only earlier slices),
    // and the rank-truncated minimum-norm solution reproduces it to rounding
    // while staying causal by construction.
    m.meta.regularized = true;
    m.meta.lambda = 0.0;
    phi = Eigen::MatrixXd::Zero(kNy * T, r);
    for (int j = 1; j <= T; ++j) {
      const long cut = kSlice * rho + kSlice * (j - 1);
      Eigen::MatrixXd lt = L.topLeftCorner(cut, cut).transpose();
      Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod;
      cod.setThreshold(kMinNormPivotRel);
      cod.compute(lt);
      phi.block(kNy * (j - 1), 0, kNy, cut) =
          cod.solve(l0y.middleRows(kNy * (j - 1), kNy).leftCols(cut).transpose()).transpose();
    }
  }

  // Structural zeros: block j of the one-step map may not touch its own slice
  // or anything later.
  for (int j = 1; j <= T; ++j) {
    const long col = kSlice * (rho + j - 1);
    phi.block(kNy * (j - 1), col, kNy, r - col).setZero();
  }
  m.phi = phi;

  // Split the future-slice columns into output / input / disturbance parts.
  Eigen::MatrixXd phi_p = phi.leftCols(kSlice * rho);
  Eigen::MatrixXd phi_y(kNy * T, kNy * T);
  Eigen::MatrixXd phi_u(kNy * T, kNu * T);
  Eigen::MatrixXd phi_d(kNy * T, kNd * T);
  for (int s = 1; s <= T; ++s) {
    const long base = kSlice * rho + kSlice * (s - 1);
    phi_y.middleCols(kNy * (s - 1), kNy) = phi.middleCols(base, kNy);
    phi_u.middleCols(kNu * (s - 1), kNu) = phi.middleCols(base + kNy, kNu);
    phi_d.middleCols(kNd * (s - 1), kNd) = phi.middleCols(base + kNy + kNu, kNd);
  }

  // Eliminate inter-step output coupling: (I - phi_y) y_f = phi_p z_p + ...
  // phi_y is strictly block lower triangular, so I - phi_y is unit lower
  // triangular and the solve is exact forward substitution.
  Eigen::MatrixXd m_y = Eigen::MatrixXd::Identity(kNy * T, kNy * T) - phi_y;
  auto lower = m_y.triangularView<Eigen::Lower>();
  Eigen::MatrixXd h_p = lower.solve(phi_p);
  Eigen::MatrixXd h_u = lower.solve(phi_u);
  Eigen::MatrixXd h_d = lower.solve(phi_d);

  // The solve cannot introduce acausal terms, but enforce the pattern exactly
  // so downstream consumers can rely on bitwise zeros.
  for (int j = 1; j <= T; ++j) {
    const int r0 = kNy * (j - 1);
    if (j - 1 < T) h_u.block(r0, j - 1, kNy, T - (j - 1)).setZero();
    if (kNd * (j - 1) < h_d.cols()) {
      h_d.block(r0, kNd * (j - 1), kNy, h_d.cols() - kNd * (j - 1)).setZero();
    }
  }

  m.h.resize(kNy * T, kSlice * rho + (kNu + kNd) * T);
  m.h << h_p, h_u, h_d;
  m.meta.data_digest = fnv1a_digest(hs.Y, fnv1a_digest(hs.Z, 1469598103934665603ULL));
  m.validate();
  return m;
}

// ---------------------------------------------------------------------------
// Prediction
// ---------------------------------------------------------------------------

// Evaluates the multistep predictor. `z_p` stacks the rho most recent slices
// (oldest first, the current time last), `u_f` and `d_f` the T future inputs
// and disturbances. The evaluation is prefix-structured: step j's output is
// assembled only from entries the causality pattern allows, so sample values
// at or after t+j cannot influence it even at the bit level.
inline Eigen::VectorXd predict(const PredictorModel& m, const Eigen::VectorXd& z_p,
                               const Eigen::VectorXd& u_f, const Eigen::VectorXd& d_f) {
  const int T = m.horizon;
  if (z_p.size() != m.zp_len()) throw std::runtime_error("predictor: z_p has wrong length");
  if (u_f.size() != kNu * T) throw std::runtime_error("predictor: u_f has wrong length");
  if (d_f.size() != kNd * T) throw std::runtime_error("predictor: d_f has wrong length");

  auto hp = m.h_p();
  auto hu = m.h_u();
  auto hd = m.h_d();
  Eigen::VectorXd y(kNy * T);
  for (int j = 1; j <= T; ++j) {
    const int r0 = kNy * (j - 1);
    Vec3 yj = hp.middleRows(r0, kNy) * z_p;
    if (j > 1) {
      yj += hu.block(r0, 0, kNy, j - 1) * u_f.head(j - 1);
      yj += hd.block(r0, 0, kNy, kNd * (j - 1)) * d_f.head(kNd * (j - 1));
    }
    y.segment(r0, kNy) = yj;
  }
  return y;
}

// ---------------------------------------------------------------------------
// Validation error
// ---------------------------------------------------------------------------

struct MaeReport {
  Eigen::MatrixXd per_deck_step;  // kNy x horizon mean absolute error
  Eigen::VectorXd per_step;       // horizon entries, averaged over decks
  double overall = 0.0;
  long windows = 0;
};

inline Eigen::VectorXd pack_zp(const pipeline::Trajectory& t, int start, int rho) {
  Eigen::VectorXd z(kSlice * rho);
  for (int s = 0; s < rho; ++s) {
    z.segment(kSlice * s, kNy) = t.y[start + s];
    z[kSlice * s + kNy] = t.u[start + s];
    z.segment(kSlice * s + kNy + kNu, kNd) = t.d[start + s];
  }
  return z;
}

// Mean absolute multistep prediction error over every admissible window of
// the given trajectories.
inline MaeReport evaluate_mae(const PredictorModel& m, const std::vector<pipeline::Trajectory>& trajs) {
  const int rho = m.rho;
  const int T = m.horizon;
  MaeReport rep;
  rep.per_deck_step = Eigen::MatrixXd::Zero(kNy, T);
  long windows = 0;
  for (const auto& t : trajs) {
    t.validate();
    const int w = t.length() - rho - T + 1;
    for (int j = 0; j < w; ++j) {
      Eigen::VectorXd z_p = pack_zp(t, j, rho);
      Eigen::VectorXd u_f(T);
      Eigen::VectorXd d_f(kNd * T);
      for (int k = 0; k < T; ++k) {
        u_f[k] = t.u[j + rho + k];
        d_f.segment(kNd * k, kNd) = t.d[j + rho + k];
      }
      Eigen::VectorXd y_hat = predict(m, z_p, u_f, d_f);
      for (int k = 0; k < T; ++k) {
        rep.per_deck_step.col(k) +=
            (t.y[j + rho + k] - Vec3(y_hat.segment(kNy * k, kNy))).cwiseAbs();
      }
      ++windows;
    }
  }
  if (windows == 0) {
    throw std::runtime_error("predictor: no admissible validation windows (trajectories too short)");
  }
  rep.per_deck_step /= static_cast<double>(windows);
  rep.per_step = rep.per_deck_step.colwise().mean();
  rep.overall = rep.per_deck_step.mean();
  rep.windows = windows;
  return rep;
}

// ---------------------------------------------------------------------------
// Model file (line-oriented text, hexfloat payload, bit-exact round trip)
// ---------------------------------------------------------------------------

inline constexpr const char* kModelMagic = "tpmodel";
inline constexpr int kModelVersion = 1;

inline void write_matrix(std::ostream& out, const char* name, const Eigen::MatrixXd& m) {
  out << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
  for (long i = 0; i < m.rows(); ++i) {
    for (long j = 0; j < m.cols(); ++j) {
      if (j) out << ' ';
      out << csv::format_double_hex(m(i, j));
    }
    out << '\n';
  }
}

inline Eigen::MatrixXd read_matrix(std::istream& in, const std::string& expect_name) {
  std::string name;
  long rows = 0, cols = 0;
  if (!(in >> name >> rows >> cols) || name != expect_name || rows < 0 || cols < 0) {
    throw std::runtime_error("predictor: malformed model file near '" + expect_name + "'");
  }
  Eigen::MatrixXd m(rows, cols);
  std::string tok;
  for (long i = 0; i < rows; ++i) {
    for (long j = 0; j < cols; ++j) {
      if (!(in >> tok)) throw std::runtime_error("predictor: model file truncated");
      m(i, j) = csv::parse_double_hex(tok);
    }
  }
  return m;
}

inline void save_model(const PredictorModel& m, const std::string& path) {
  m.validate();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("predictor: cannot open model file for writing: " + path);
  out << kModelMagic << ' ' << kModelVersion << '\n';
  out << "rho " << m.rho << '\n';
  out << "horizon " << m.horizon << '\n';
  out << "n_cols " << m.meta.n_cols << '\n';
  out << "regularized " << (m.meta.regularized ? 1 : 0) << '\n';
  out << "lambda " << csv::format_double_hex(m.meta.lambda) << '\n';
  out << "min_abs_diag " << csv::format_double_hex(m.meta.min_abs_diag) << '\n';
  out << "digest " << m.meta.data_digest << '\n';
  write_matrix(out, "phi", m.phi);
  write_matrix(out, "h", m.h);
  if (!out) throw std::runtime_error("predictor: write failed: " + path);
}

inline PredictorModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("predictor: cannot open model file: " + path);
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != kModelMagic || version != kModelVersion) {
    throw std::runtime_error("predictor: not a recognized model file: " + path);
  }
  PredictorModel m;
  std::string key;
  auto expect_key = [&](const char* want) {
    if (!(in >> key) || key != want) {
      throw std::runtime_error(std::string("predictor: model file missing field '") + want + "'");
    }
  };
  expect_key("rho");
  in >> m.rho;
  expect_key("horizon");
  in >> m.horizon;
  expect_key("n_cols");
  in >> m.meta.n_cols;
  expect_key("regularized");
  int reg = 0;
  in >> reg;
  m.meta.regularized = reg != 0;
  expect_key("lambda");
  std::string tok;
  in >> tok;
  m.meta.lambda = csv::parse_double_hex(tok);
  expect_key("min_abs_diag");
  in >> tok;
  m.meta.min_abs_diag = csv::parse_double_hex(tok);
  expect_key("digest");
  in >> m.meta.data_digest;
  if (!in) throw std::runtime_error("predictor: malformed model header in " + path);
  m.phi = read_matrix(in, "phi");
  m.h = read_matrix(in, "h");
  m.validate();
  return m;
}

}  // namespace railtherm::predictor
