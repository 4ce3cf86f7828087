#pragma once

// Minimal CSV and timestamp plumbing shared by the ingestion pipeline and the
// run harness. The file formats used here are plain comma-separated values
// with a single header line and no quoting.

#include <charconv>
#include <cstdint>
#include <ctime>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

namespace railtherm::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::string origin;

  int column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return static_cast<int>(i);
    }
    throw std::runtime_error(origin + ": missing column '" + name + "'");
  }
};

inline std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

inline Table read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open CSV file: " + path);
  Table t;
  t.origin = path;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file, expected header");
  t.header = split_line(line);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    std::vector<std::string> row = split_line(line);
    if (row.size() != t.header.size()) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected " +
                               std::to_string(t.header.size()) + " fields, got " +
                               std::to_string(row.size()));
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline void write_csv(const std::string& path, const std::vector<std::string>& header,
                      const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open CSV file for writing: " + path);
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) out << ',';
    out << header[i];
  }
  out << '\n';
  for (const auto& row : rows) {
    if (row.size() != header.size()) {
      throw std::runtime_error(path + ": row width does not match header");
    }
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << ',';
      out << row[i];
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline double to_double(const std::string& s, const std::string& what = "value") {
  try {
    std::size_t used = 0;
    double x = std::stod(s, &used);
    while (used < s.size() && (s[used] == ' ' || s[used] == '\t')) ++used;
    if (used != s.size()) throw std::invalid_argument(s);
    return x;
  } catch (const std::exception&) {
    throw std::runtime_error("cannot parse " + what + " from '" + s + "'");
  }
}

// Full-precision round-trippable decimal formatting for doubles.
inline std::string format_double(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  if (res.ec != std::errc()) throw std::runtime_error("double formatting failed");
  return std::string(buf, res.ptr);
}

// Bit-exact hexadecimal float formatting (used by the model file format).
inline std::string format_double_hex(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x, std::chars_format::hex);
  if (res.ec != std::errc()) throw std::runtime_error("hexfloat formatting failed");
  return std::string(buf, res.ptr);
}

inline double parse_double_hex(const std::string& s) {
  double x = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), x, std::chars_format::hex);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw std::runtime_error("cannot parse hexfloat '" + s + "'");
  }
  return x;
}

// ISO-8601 UTC timestamps of the form YYYY-MM-DDTHH:MM:SSZ <-> Unix seconds.
inline std::int64_t parse_iso8601_utc(const std::string& s) {
  std::tm tm{};
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, se = 0;
  char t = 0, z = 0;
  std::istringstream in(s);
  char dash1 = 0, dash2 = 0, colon1 = 0, colon2 = 0;
  in >> y >> dash1 >> mo >> dash2 >> d >> t >> h >> colon1 >> mi >> colon2 >> se >> z;
  if (!in || dash1 != '-' || dash2 != '-' || (t != 'T' && t != ' ') || colon1 != ':' ||
      colon2 != ':' || z != 'Z') {
    throw std::runtime_error("cannot parse timestamp '" + s + "' (expected YYYY-MM-DDTHH:MM:SSZ)");
  }
  tm.tm_year = y - 1900;
  tm.tm_mon = mo - 1;
  tm.tm_mday = d;
  tm.tm_hour = h;
  tm.tm_min = mi;
  tm.tm_sec = se;
  std::time_t out = timegm(&tm);
  if (out == static_cast<std::time_t>(-1)) {
    throw std::runtime_error("timestamp out of range: '" + s + "'");
  }
  return static_cast<std::int64_t>(out);
}

inline std::string format_iso8601_utc(std::int64_t unix_seconds) {
  std::time_t t = static_cast<std::time_t>(unix_seconds);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02dZ", tm.tm_year + 1900,
                tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec);
  return buf;
}

}  // namespace railtherm::csv
