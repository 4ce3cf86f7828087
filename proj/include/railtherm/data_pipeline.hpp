#pragma once

// Data pipeline turning raw on-board logs into regression-ready trajectory
// sets and block-Hankel matrices.
//
// Raw inputs are three CSV streams: HVAC samples (the master clock; setpoint,
// per-deck room temperatures, operating mode, speed), weather samples
// (position + ambient + solar geometry, typically slower and unaligned), and
// trip intervals (occupancy). Fusion joins them onto the HVAC clock, derives
// the train heading from consecutive positions, projects irradiance into the
// roof/side components, resamples everything onto a uniform grid by bin
// averaging, cuts the result into gap-free regular-operation trajectories,
// and finally stacks sliding windows into the extended Hankel matrices the
// predictor is fitted on.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "railtherm/coach_sim.hpp"
#include "railtherm/csv.hpp"
#include "railtherm/hvac_stack.hpp"
#include "railtherm/types.hpp"

namespace railtherm::pipeline {

inline constexpr double kPi = std::numbers::pi;

// Component counts of one time slice z = [y; u; d].
inline constexpr int kNy = 3;
inline constexpr int kNu = 1;
inline constexpr int kNd = 5;
inline constexpr int kSlice = kNy + kNu + kNd;

// ---------------------------------------------------------------------------
// Raw records
// ---------------------------------------------------------------------------

struct HvacRecord {
  std::int64_t ts = 0;  // Unix seconds, UTC
  hvac::Mode mode = hvac::Mode::Regular;
  double t_ref_c = 0.0;
  Vec3 t_room_c = Vec3::Zero();
  double speed_ms = 0.0;
};

struct WeatherRecord {
  std::int64_t ts = 0;
  double lat_deg = 0.0;
  double lon_deg = 0.0;
  double t_amb_c = 0.0;
  double q_g_w_per_m2 = 0.0;
  double alpha_rad = 0.0;
  double beta_rad = 0.0;
};

struct TripRecord {
  std::int64_t start = 0;
  std::int64_t end = 0;  // exclusive
  double occupancy_pct = 0.0;
};

struct RawRecordSet {
  std::vector<HvacRecord> hvac;
  std::vector<WeatherRecord> weather;
  std::vector<TripRecord> trips;

  // Sorts all streams by time and rejects records the pipeline cannot use:
  // duplicate timestamps within a stream and overlapping trip intervals.
  void normalize() {
    auto by_ts = [](const auto& a, const auto& b) { return a.ts < b.ts; };
    std::sort(hvac.begin(), hvac.end(), by_ts);
    std::sort(weather.begin(), weather.end(), by_ts);
    std::sort(trips.begin(), trips.end(),
              [](const TripRecord& a, const TripRecord& b) { return a.start < b.start; });
    for (std::size_t i = 1; i < hvac.size(); ++i) {
      if (hvac[i].ts == hvac[i - 1].ts) {
        throw std::runtime_error("pipeline: duplicate HVAC timestamp " +
                                 csv::format_iso8601_utc(hvac[i].ts));
      }
    }
    for (std::size_t i = 1; i < weather.size(); ++i) {
      if (weather[i].ts == weather[i - 1].ts) {
        throw std::runtime_error("pipeline: duplicate weather timestamp " +
                                 csv::format_iso8601_utc(weather[i].ts));
      }
    }
    for (const auto& t : trips) {
      if (!(t.start < t.end)) {
        throw std::runtime_error("pipeline: trip interval must satisfy start < end");
      }
      if (t.occupancy_pct < 0.0 || t.occupancy_pct > 1.0) {
        throw std::runtime_error("pipeline: trip occupancy must lie in [0, 1]");
      }
    }
    for (std::size_t i = 1; i < trips.size(); ++i) {
      if (trips[i].start < trips[i - 1].end) {
        throw std::runtime_error("pipeline: overlapping trip intervals at " +
                                 csv::format_iso8601_utc(trips[i].start));
      }
    }
  }
};

// ---------------------------------------------------------------------------
// Heading from consecutive positions
// ---------------------------------------------------------------------------

inline constexpr double kEarthRadiusM = 6371000.0;
inline constexpr double kHeadingMinDisplacementM = 1.0;

// Bearing of the displacement from (lat0, lon0) to (lat1, lon1) using a local
// equirectangular projection: 0 = north, pi/2 = east. Also returns the
// displacement length so callers can ignore numerically meaningless moves.
inline std::pair<double, double> bearing_and_distance(double lat0_deg, double lon0_deg,
                                                      double lat1_deg, double lon1_deg) {
  const double deg = kPi / 180.0;
  double mid_lat = 0.5 * (lat0_deg + lat1_deg) * deg;
  double d_north = (lat1_deg - lat0_deg) * deg * kEarthRadiusM;
  double d_east = (lon1_deg - lon0_deg) * deg * std::cos(mid_lat) * kEarthRadiusM;
  double dist = std::hypot(d_north, d_east);
  double theta = (dist > 0.0) ? std::atan2(d_east, d_north) : 0.0;
  return {theta, dist};
}

// Per-record headings for a position stream. The heading of record k is the
// bearing from record k-1 to record k; when the displacement is below the
// threshold (parked train, GPS jitter) the previous heading carries forward.
// The stream starts pointing north (0 rad) until the first real move.
inline std::vector<double> headings(const std::vector<WeatherRecord>& weather) {
  std::vector<double> out(weather.size(), 0.0);
  double current = 0.0;
  for (std::size_t i = 1; i < weather.size(); ++i) {
    auto [theta, dist] = bearing_and_distance(weather[i - 1].lat_deg, weather[i - 1].lon_deg,
                                              weather[i].lat_deg, weather[i].lon_deg);
    if (dist >= kHeadingMinDisplacementM) current = theta;
    out[i] = current;
  }
  return out;
}

// Heading at the end of a (lat_deg, lon_deg) track: the bearing after the
// last real move, with sub-threshold displacements carried over as above.
inline double heading(const std::vector<std::pair<double, double>>& track) {
  if (track.size() < 2) {
    throw std::runtime_error("pipeline: heading needs at least two positions");
  }
  double current = 0.0;
  for (std::size_t i = 1; i < track.size(); ++i) {
    auto [theta, dist] = bearing_and_distance(track[i - 1].first, track[i - 1].second,
                                              track[i].first, track[i].second);
    if (dist >= kHeadingMinDisplacementM) current = theta;
  }
  return current;
}

// ---------------------------------------------------------------------------
// Fusion onto the HVAC clock
// ---------------------------------------------------------------------------

// One sample on the HVAC clock. `missing` marks samples without usable
// weather context (no record yet, or the newest one is stale); they are never
// interpolated, later stages drop them.
struct FusedSample {
  std::int64_t ts = 0;
  bool missing = false;
  bool regular = false;  // HVAC operating mode was Regular
  double u = 0.0;        // setpoint
  Vec3 y = Vec3::Zero(); // room temperatures [up, mid, low]
  Vec5 d = Vec5::Zero(); // [t_amb, q_top, q_side, occupancy, speed]
};

// Median spacing of a sorted timestamp stream; infinity when fewer than two
// records exist (staleness then never triggers).
inline double nominal_period_s(const std::vector<WeatherRecord>& weather) {
  if (weather.size() < 2) return std::numeric_limits<double>::infinity();
  std::vector<double> diffs;
  diffs.reserve(weather.size() - 1);
  for (std::size_t i = 1; i < weather.size(); ++i) {
    diffs.push_back(static_cast<double>(weather[i].ts - weather[i - 1].ts));
  }
  std::nth_element(diffs.begin(), diffs.begin() + diffs.size() / 2, diffs.end());
  return diffs[diffs.size() / 2];
}

// Joins the three raw streams onto the HVAC timestamps. Weather uses the most
// recent record at-or-before each sample, rejected as stale when older than
// `staleness_factor` nominal periods. Occupancy comes from the trip interval
// containing the sample (0 outside trips). Irradiance is projected into
// roof/side components using the heading derived from consecutive positions.
inline std::vector<FusedSample> fuse(const RawRecordSet& raw, double staleness_factor = 2.0) {
  std::vector<FusedSample> out;
  out.reserve(raw.hvac.size());
  const std::vector<double> theta = headings(raw.weather);
  const double stale_limit = staleness_factor * nominal_period_s(raw.weather);

  std::size_t wi = 0;  // index of the last weather record at-or-before ts (wi-1 after scan)
  std::size_t ti = 0;
  for (const HvacRecord& h : raw.hvac) {
    while (wi < raw.weather.size() && raw.weather[wi].ts <= h.ts) ++wi;
    while (ti < raw.trips.size() && raw.trips[ti].end <= h.ts) ++ti;

    FusedSample s;
    s.ts = h.ts;
    s.regular = (h.mode == hvac::Mode::Regular);
    s.u = h.t_ref_c;
    s.y = h.t_room_c;
    if (wi == 0 || static_cast<double>(h.ts - raw.weather[wi - 1].ts) > stale_limit) {
      s.missing = true;
    } else {
      const WeatherRecord& w = raw.weather[wi - 1];
      auto [q_top, q_side] =
          coach::solar_components(w.q_g_w_per_m2, w.alpha_rad, w.beta_rad, theta[wi - 1]);
      double occ = 0.0;
      if (ti < raw.trips.size() && raw.trips[ti].start <= h.ts && h.ts < raw.trips[ti].end) {
        occ = raw.trips[ti].occupancy_pct;
      }
      s.d << w.t_amb_c, q_top, q_side, occ, h.speed_ms;
    }
    out.push_back(s);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Uniform resampling
// ---------------------------------------------------------------------------

struct UniformSeries {
  std::int64_t t0 = 0;   // left edge of the first bin
  double period_s = 0.0;
  struct Cell {
    bool gap = true;      // no usable sample fell into this bin
    bool regular = false; // every sample in the bin (usable or not) was Regular
    double u = 0.0;
    Vec3 y = Vec3::Zero();
    Vec5 d = Vec5::Zero();
  };
  std::vector<Cell> cells;
};

// Bin-averages fused samples onto a left-aligned uniform grid. The grid
// anchor is floor(first_ts / period) * period, bins are [t0 + k*p, t0 + (k+1)*p).
// A bin becomes a gap when no sample fell into it or when any sample in it
// lacked weather context (partial context would silently bias the mean). A
// bin counts as Regular only if every sample that fell into it ran in
// Regular mode.
inline UniformSeries resample(const std::vector<FusedSample>& samples, double period_s) {
  if (!(period_s > 0.0)) throw std::runtime_error("pipeline: resample period must be positive");
  UniformSeries out;
  out.period_s = period_s;
  if (samples.empty()) return out;

  const std::int64_t p = static_cast<std::int64_t>(period_s);
  if (static_cast<double>(p) != period_s) {
    throw std::runtime_error("pipeline: resample period must be a whole number of seconds");
  }
  std::int64_t first = samples.front().ts;
  std::int64_t last = samples.back().ts;
  auto floor_div = [](std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    return (a % b != 0 && ((a < 0) != (b < 0))) ? q - 1 : q;
  };
  out.t0 = floor_div(first, p) * p;
  std::size_t n_bins = static_cast<std::size_t>(floor_div(last, p) - floor_div(first, p)) + 1;
  out.cells.assign(n_bins, UniformSeries::Cell{});

  std::vector<int> count(n_bins, 0);
  std::vector<bool> any_nonregular(n_bins, false);
  std::vector<bool> any_missing(n_bins, false);
  std::vector<bool> touched(n_bins, false);
  for (const FusedSample& s : samples) {
    std::size_t k = static_cast<std::size_t>(floor_div(s.ts - out.t0, p));
    touched[k] = true;
    if (!s.regular) any_nonregular[k] = true;
    if (s.missing) {
      any_missing[k] = true;
      continue;
    }
    UniformSeries::Cell& c = out.cells[k];
    c.u += s.u;
    c.y += s.y;
    c.d += s.d;
    ++count[k];
  }
  for (std::size_t k = 0; k < n_bins; ++k) {
    UniformSeries::Cell& c = out.cells[k];
    if (count[k] == 0 || any_missing[k]) {
      c = UniformSeries::Cell{};  // gap
      continue;
    }
    c.gap = false;
    c.regular = touched[k] && !any_nonregular[k];
    c.u /= count[k];
    c.y /= count[k];
    c.d /= count[k];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Trajectories
// ---------------------------------------------------------------------------

struct Trajectory {
  int id = 0;
  double period_s = 0.0;
  std::vector<double> u;
  std::vector<Vec3> y;
  std::vector<Vec5> d;

  int length() const { return static_cast<int>(u.size()); }

  void validate() const {
    if (!(period_s > 0.0)) throw std::runtime_error("pipeline: trajectory period must be > 0");
    if (u.size() != y.size() || u.size() != d.size()) {
      throw std::runtime_error("pipeline: trajectory channel lengths differ");
    }
    for (std::size_t i = 0; i < u.size(); ++i) {
      bool ok = std::isfinite(u[i]) && y[i].allFinite() && d[i].allFinite();
      if (!ok) {
        throw std::runtime_error("pipeline: non-finite trajectory sample at index " +
                                 std::to_string(i));
      }
    }
  }
};

struct SegmentSummary {
  double period_s = 0.0;
  int n_trajectories = 0;     // #T: kept trajectories
  long n_samples = 0;         // #D: total samples across kept trajectories
  double mean_length = 0.0;   // samples per kept trajectory
  int n_dropped_short = 0;    // maximal runs shorter than the minimum length
  int total_cells = 0;
  int gap_cells = 0;
  int nonregular_cells = 0;
};

// Cuts a uniform series into maximal gap-free, Regular-only runs and keeps
// those long enough to contribute at least one Hankel column.
inline std::pair<std::vector<Trajectory>, SegmentSummary> segment_filter(
    const UniformSeries& series, int min_length) {
  if (min_length < 1) throw std::runtime_error("pipeline: minimum trajectory length must be >= 1");
  std::vector<Trajectory> trajs;
  SegmentSummary sum;
  sum.period_s = series.period_s;
  sum.total_cells = static_cast<int>(series.cells.size());

  std::size_t i = 0;
  const auto& cells = series.cells;
  while (i < cells.size()) {
    if (cells[i].gap) {
      ++sum.gap_cells;
      ++i;
      continue;
    }
    if (!cells[i].regular) {
      ++sum.nonregular_cells;
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < cells.size() && !cells[j].gap && cells[j].regular) ++j;
    std::size_t run = j - i;
    if (run >= static_cast<std::size_t>(min_length)) {
      Trajectory t;
      t.id = static_cast<int>(trajs.size());
      t.period_s = series.period_s;
      t.u.reserve(run);
      for (std::size_t k = i; k < j; ++k) {
        t.u.push_back(cells[k].u);
        t.y.push_back(cells[k].y);
        t.d.push_back(cells[k].d);
      }
      trajs.push_back(std::move(t));
    } else {
      ++sum.n_dropped_short;
    }
    i = j;
  }
  sum.n_trajectories = static_cast<int>(trajs.size());
  for (const auto& t : trajs) sum.n_samples += t.length();
  if (!trajs.empty()) {
    sum.mean_length = static_cast<double>(sum.n_samples) / static_cast<double>(trajs.size());
  }
  return {std::move(trajs), sum};
}

// Bin-mean decimation by an integer factor; a trailing partial bin is
// dropped. The sample period scales by the factor.
inline Trajectory downsample(const Trajectory& t, int factor) {
  if (factor < 1) throw std::runtime_error("pipeline: downsample factor must be >= 1");
  Trajectory out;
  out.id = t.id;
  out.period_s = t.period_s * factor;
  int n = t.length() / factor;
  out.u.reserve(n);
  for (int k = 0; k < n; ++k) {
    double u = 0.0;
    Vec3 y = Vec3::Zero();
    Vec5 d = Vec5::Zero();
    for (int j = 0; j < factor; ++j) {
      u += t.u[k * factor + j];
      y += t.y[k * factor + j];
      d += t.d[k * factor + j];
    }
    out.u.push_back(u / factor);
    out.y.push_back(y / factor);
    out.d.push_back(d / factor);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Extended Hankel matrices
// ---------------------------------------------------------------------------

// Sliding-window data matrices for the multistep predictor. Each column is
// one window: rho past slices stacked (z = [y; u; d] per slice, oldest
// first), followed by the T future slices in the same layout. Y repeats the
// future outputs for convenience. `col_traj` tags each column with the id of
// the trajectory it came from.
struct HankelSet {
  Eigen::MatrixXd Z;  // (kSlice * (rho + horizon)) x N
  Eigen::MatrixXd Y;  // (kNy * horizon) x N
  int rho = 0;
  int horizon = 0;
  std::vector<int> col_traj;
  int skipped_short = 0;  // trajectories too short to contribute a column

  long cols() const { return Z.cols(); }
};

inline HankelSet build_hankel(const std::vector<Trajectory>& trajs, int rho, int horizon) {
  if (rho < 1 || horizon < 1) {
    throw std::runtime_error("pipeline: rho and horizon must be >= 1");
  }
  HankelSet h;
  h.rho = rho;
  h.horizon = horizon;

  // Deterministic column order regardless of input order: trajectories are
  // processed by ascending id.
  std::vector<const Trajectory*> ordered;
  ordered.reserve(trajs.size());
  for (const auto& t : trajs) ordered.push_back(&t);
  std::sort(ordered.begin(), ordered.end(),
            [](const Trajectory* a, const Trajectory* b) { return a->id < b->id; });

  long total = 0;
  for (const Trajectory* t : ordered) {
    long w = static_cast<long>(t->length()) - rho - horizon + 1;
    if (w >= 1) {
      total += w;
    } else {
      ++h.skipped_short;
    }
  }
  if (total == 0) {
    throw std::runtime_error(
        "pipeline: no trajectory is long enough to contribute a window (need rho + horizon = " +
        std::to_string(rho + horizon) + " samples)");
  }
  const int rows = kSlice * (rho + horizon);
  h.Z.resize(rows, total);
  h.Y.resize(kNy * horizon, total);
  h.col_traj.reserve(static_cast<std::size_t>(total));

  long col = 0;
  for (const Trajectory* tp : ordered) {
    const Trajectory& t = *tp;
    t.validate();
    long w = static_cast<long>(t.length()) - rho - horizon + 1;
    for (long j = 0; j < w; ++j) {
      for (int s = 0; s < rho + horizon; ++s) {
        long idx = j + s;
        h.Z.block(kSlice * s, col, kNy, 1) = t.y[idx];
        h.Z(kSlice * s + kNy, col) = t.u[idx];
        h.Z.block(kSlice * s + kNy + kNu, col, kNd, 1) = t.d[idx];
        if (s >= rho) {
          h.Y.block(kNy * (s - rho), col, kNy, 1) = t.y[idx];
        }
      }
      h.col_traj.push_back(t.id);
      ++col;
    }
  }
  return h;
}

// ---------------------------------------------------------------------------
// CSV bindings
// ---------------------------------------------------------------------------

inline const std::vector<std::string> kHvacHeader = {
    "timestamp", "mode", "t_ref_c", "t_room_up_c", "t_room_mid_c", "t_room_low_c", "speed_ms"};
inline const std::vector<std::string> kWeatherHeader = {
    "timestamp", "lat_deg", "lon_deg", "t_amb_c", "q_g_wm2", "alpha_rad", "beta_rad"};
inline const std::vector<std::string> kTripsHeader = {"start", "end", "occupancy_pct"};
inline const std::vector<std::string> kTrajectoryHeader = {"t",  "u",  "y1", "y2", "y3",
                                                           "d1", "d2", "d3", "d4", "d5"};

inline void require_header(const csv::Table& t, const std::vector<std::string>& expect) {
  if (t.header != expect) {
    std::string want;
    for (std::size_t i = 0; i < expect.size(); ++i) want += (i ? "," : "") + expect[i];
    throw std::runtime_error(t.origin + ": unexpected header (want '" + want + "')");
  }
}

inline std::vector<HvacRecord> load_hvac_csv(const std::string& path) {
  csv::Table t = csv::read_csv(path);
  require_header(t, kHvacHeader);
  std::vector<HvacRecord> out;
  out.reserve(t.rows.size());
  for (const auto& r : t.rows) {
    HvacRecord h;
    h.ts = csv::parse_iso8601_utc(r[0]);
    h.mode = hvac::mode_from_string(r[1]);
    h.t_ref_c = csv::to_double(r[2], "t_ref_c");
    h.t_room_c = Vec3(csv::to_double(r[3], "t_room_up_c"), csv::to_double(r[4], "t_room_mid_c"),
                      csv::to_double(r[5], "t_room_low_c"));
    h.speed_ms = csv::to_double(r[6], "speed_ms");
    out.push_back(h);
  }
  return out;
}

inline std::vector<WeatherRecord> load_weather_csv(const std::string& path) {
  csv::Table t = csv::read_csv(path);
  require_header(t, kWeatherHeader);
  std::vector<WeatherRecord> out;
  out.reserve(t.rows.size());
  for (const auto& r : t.rows) {
    WeatherRecord w;
    w.ts = csv::parse_iso8601_utc(r[0]);
    w.lat_deg = csv::to_double(r[1], "lat_deg");
    w.lon_deg = csv::to_double(r[2], "lon_deg");
    w.t_amb_c = csv::to_double(r[3], "t_amb_c");
    w.q_g_w_per_m2 = csv::to_double(r[4], "q_g_wm2");
    w.alpha_rad = csv::to_double(r[5], "alpha_rad");
    w.beta_rad = csv::to_double(r[6], "beta_rad");
    out.push_back(w);
  }
  return out;
}

inline std::vector<TripRecord> load_trips_csv(const std::string& path) {
  csv::Table t = csv::read_csv(path);
  require_header(t, kTripsHeader);
  std::vector<TripRecord> out;
  out.reserve(t.rows.size());
  for (const auto& r : t.rows) {
    TripRecord tr;
    tr.start = csv::parse_iso8601_utc(r[0]);
    tr.end = csv::parse_iso8601_utc(r[1]);
    tr.occupancy_pct = csv::to_double(r[2], "occupancy_pct");
    out.push_back(tr);
  }
  return out;
}

inline RawRecordSet load_raw_records(const std::string& hvac_path, const std::string& weather_path,
                                     const std::string& trips_path) {
  RawRecordSet raw;
  raw.hvac = load_hvac_csv(hvac_path);
  raw.weather = load_weather_csv(weather_path);
  raw.trips = load_trips_csv(trips_path);
  raw.normalize();
  return raw;
}

inline void write_hvac_csv(const std::vector<HvacRecord>& recs, const std::string& path) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(recs.size());
  for (const auto& h : recs) {
    rows.push_back({csv::format_iso8601_utc(h.ts), hvac::to_string(h.mode),
                    csv::format_double(h.t_ref_c), csv::format_double(h.t_room_c[0]),
                    csv::format_double(h.t_room_c[1]), csv::format_double(h.t_room_c[2]),
                    csv::format_double(h.speed_ms)});
  }
  csv::write_csv(path, kHvacHeader, rows);
}

inline void write_weather_csv(const std::vector<WeatherRecord>& recs, const std::string& path) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(recs.size());
  for (const auto& w : recs) {
    rows.push_back({csv::format_iso8601_utc(w.ts), csv::format_double(w.lat_deg),
                    csv::format_double(w.lon_deg), csv::format_double(w.t_amb_c),
                    csv::format_double(w.q_g_w_per_m2), csv::format_double(w.alpha_rad),
                    csv::format_double(w.beta_rad)});
  }
  csv::write_csv(path, kWeatherHeader, rows);
}

inline void write_trips_csv(const std::vector<TripRecord>& recs, const std::string& path) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(recs.size());
  for (const auto& t : recs) {
    rows.push_back({csv::format_iso8601_utc(t.start), csv::format_iso8601_utc(t.end),
                    csv::format_double(t.occupancy_pct)});
  }
  csv::write_csv(path, kTripsHeader, rows);
}

// Writes the three raw logs with canonical names into `dir`; the inverse of
// load_raw_records on (hvac.csv, weather.csv, trips.csv).
inline void write_raw_records(const RawRecordSet& raw, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (!fs::is_directory(dir)) {
    throw std::runtime_error("pipeline: cannot create raw record directory " + dir);
  }
  write_hvac_csv(raw.hvac, (fs::path(dir) / "hvac.csv").string());
  write_weather_csv(raw.weather, (fs::path(dir) / "weather.csv").string());
  write_trips_csv(raw.trips, (fs::path(dir) / "trips.csv").string());
}

inline void write_trajectory_csv(const Trajectory& t, const std::string& path) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(t.u.size());
  for (int k = 0; k < t.length(); ++k) {
    std::vector<std::string> r;
    r.reserve(10);
    r.push_back(csv::format_double(k * t.period_s));
    r.push_back(csv::format_double(t.u[k]));
    for (int i = 0; i < 3; ++i) r.push_back(csv::format_double(t.y[k][i]));
    for (int i = 0; i < 5; ++i) r.push_back(csv::format_double(t.d[k][i]));
    rows.push_back(std::move(r));
  }
  csv::write_csv(path, kTrajectoryHeader, rows);
}

inline Trajectory load_trajectory_csv(const std::string& path, int id = 0) {
  csv::Table t = csv::read_csv(path);
  require_header(t, kTrajectoryHeader);
  if (t.rows.size() < 2) {
    throw std::runtime_error(path + ": trajectory needs at least two samples");
  }
  Trajectory out;
  out.id = id;
  double t0 = csv::to_double(t.rows[0][0], "t");
  double t1 = csv::to_double(t.rows[1][0], "t");
  out.period_s = t1 - t0;
  for (std::size_t k = 0; k < t.rows.size(); ++k) {
    const auto& r = t.rows[k];
    double tk = csv::to_double(r[0], "t");
    if (std::abs(tk - (t0 + out.period_s * static_cast<double>(k))) > 1e-6) {
      throw std::runtime_error(path + ": non-uniform sample times in trajectory");
    }
    out.u.push_back(csv::to_double(r[1], "u"));
    out.y.emplace_back(csv::to_double(r[2], "y1"), csv::to_double(r[3], "y2"),
                       csv::to_double(r[4], "y3"));
    Vec5 d;
    d << csv::to_double(r[5], "d1"), csv::to_double(r[6], "d2"), csv::to_double(r[7], "d3"),
        csv::to_double(r[8], "d4"), csv::to_double(r[9], "d5");
    out.d.push_back(d);
  }
  out.validate();
  return out;
}

inline std::string trajectory_filename(int id) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "traj_%03d.csv", id);
  return buf;
}

inline void write_trajectory_dir(const std::vector<Trajectory>& trajs, const std::string& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& t : trajs) {
    write_trajectory_csv(t, (std::filesystem::path(dir) / trajectory_filename(t.id)).string());
  }
}

inline std::vector<Trajectory> load_trajectory_dir(const std::string& dir) {
  std::vector<std::string> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".csv") {
      files.push_back(entry.path().string());
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw std::runtime_error("pipeline: no trajectory CSV files in " + dir);
  std::vector<Trajectory> out;
  for (std::size_t i = 0; i < files.size(); ++i) {
    out.push_back(load_trajectory_csv(files[i], static_cast<int>(i)));
  }
  return out;
}

}  // namespace railtherm::pipeline
