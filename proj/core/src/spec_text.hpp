#pragma once

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "voxtrack/errors.hpp"

namespace voxtrack::detail {

inline std::string trim(const std::string& s) {
  const size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<double> numbers(const std::string& value, size_t expected, int line, const std::string& key) {
  std::istringstream in(value);
  std::vector<double> out;
  std::string tok;
  while (in >> tok) {
    size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != tok.size() || !std::isfinite(v)) throw SpecParseError(line, "bad number '" + tok + "' for " + key);
    out.push_back(v);
  }
  if (out.size() != expected)
    throw SpecParseError(line, key + " expects " + std::to_string(expected) + " values, got " +
                                   std::to_string(out.size()));
  return out;
}

struct KeyValue {
  int line = 0;
  std::string key;
  std::string value;
};

/// Splits `key = value` lines, dropping blanks and `#` comments.
inline std::vector<KeyValue> key_values(const std::string& text, int* last_line = nullptr) {
  std::vector<KeyValue> out;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const size_t hash = raw.find('#');
    const std::string content = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (content.empty()) continue;
    const size_t eq = content.find('=');
    if (eq == std::string::npos) throw SpecParseError(line, "expected 'key = value'");
    out.push_back({line, trim(content.substr(0, eq)), trim(content.substr(eq + 1))});
  }
  if (last_line) *last_line = line;
  return out;
}

}  // namespace voxtrack::detail
