#pragma once

// Line-oriented "key = value" configuration files.
//
// Format:
//   * '#' starts a comment (full line or trailing).
//   * Blank lines are ignored.
//   * Everything before the first '=' is the key (trimmed), the remainder is
//     the raw value string (trimmed). Values may hold one number, a
//     whitespace-separated list of numbers, or free text.
//   * Later occurrences of a key override earlier ones.

#include <cstddef>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace railtherm::cfg {

inline std::string trim(const std::string& s) {
  const char* ws = " \t\r\n";
  std::size_t a = s.find_first_not_of(ws);
  if (a == std::string::npos) return {};
  std::size_t b = s.find_last_not_of(ws);
  return s.substr(a, b - a + 1);
}

class KeyValueFile {
 public:
  KeyValueFile() = default;

  static KeyValueFile parse(std::istream& in, const std::string& origin = "<stream>") {
    KeyValueFile kv;
    kv.origin_ = origin;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      std::size_t hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      std::string t = trim(line);
      if (t.empty()) continue;
      std::size_t eq = t.find('=');
      if (eq == std::string::npos) {
        throw std::runtime_error(origin + ":" + std::to_string(lineno) +
                                 ": expected 'key = value', got '" + t + "'");
      }
      std::string key = trim(t.substr(0, eq));
      std::string value = trim(t.substr(eq + 1));
      if (key.empty()) {
        throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": empty key");
      }
      kv.entries_[key] = value;
    }
    return kv;
  }

  static KeyValueFile load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    return parse(in, path);
  }

  static KeyValueFile from_string(const std::string& text, const std::string& origin = "<string>") {
    std::istringstream in(text);
    return parse(in, origin);
  }

  bool has(const std::string& key) const { return entries_.count(key) != 0; }

  const std::string& text(const std::string& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) {
      throw std::runtime_error(origin_ + ": missing required key '" + key + "'");
    }
    return it->second;
  }

  std::string text_or(const std::string& key, const std::string& fallback) const {
    auto it = entries_.find(key);
    return it == entries_.end() ? fallback : it->second;
  }

  double number(const std::string& key) const {
    std::vector<double> v = numbers(key);
    if (v.size() != 1) {
      throw std::runtime_error(origin_ + ": key '" + key + "' must hold exactly one number");
    }
    return v[0];
  }

  double number_or(const std::string& key, double fallback) const {
    return has(key) ? number(key) : fallback;
  }

  std::vector<double> numbers(const std::string& key) const {
    std::istringstream in(text(key));
    std::vector<double> out;
    std::string tok;
    while (in >> tok) {
      try {
        std::size_t used = 0;
        double x = std::stod(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
        out.push_back(x);
      } catch (const std::exception&) {
        throw std::runtime_error(origin_ + ": key '" + key + "': '" + tok + "' is not a number");
      }
    }
    if (out.empty()) {
      throw std::runtime_error(origin_ + ": key '" + key + "' holds no numbers");
    }
    return out;
  }

  std::vector<double> numbers_n(const std::string& key, std::size_t n) const {
    std::vector<double> v = numbers(key);
    if (v.size() != n) {
      throw std::runtime_error(origin_ + ": key '" + key + "' must hold " + std::to_string(n) +
                               " numbers, got " + std::to_string(v.size()));
    }
    return v;
  }

  const std::map<std::string, std::string>& entries() const { return entries_; }
  const std::string& origin() const { return origin_; }

 private:
  std::map<std::string, std::string> entries_;
  std::string origin_ = "<empty>";
};

}  // namespace railtherm::cfg
