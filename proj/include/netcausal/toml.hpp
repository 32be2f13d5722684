#pragma once

#include <cctype>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "netcausal/common.hpp"

// Minimal TOML subset: [section] headers, key = value pairs, # comments,
// values limited to strings, integers, floats, booleans, and flat arrays.
// Keys flatten to "section.key".
namespace netcausal::toml {

struct Value {
  enum class Kind { str, integer, real, boolean, array };
  Kind kind = Kind::str;
  std::string s;
  long long i = 0;
  double f = 0.0;
  bool b = false;
  std::vector<Value> arr;

  double as_double() const {
    if (kind == Kind::real) return f;
    if (kind == Kind::integer) return static_cast<double>(i);
    throw parse_error("config value '" + s + "' is not numeric");
  }
  long long as_int() const {
    if (kind == Kind::integer) return i;
    throw parse_error("config value is not an integer");
  }
  const std::string& as_str() const {
    if (kind != Kind::str) throw parse_error("config value is not a string");
    return s;
  }
  bool as_bool() const {
    if (kind != Kind::boolean) throw parse_error("config value is not a boolean");
    return b;
  }
  std::vector<double> as_double_array() const {
    if (kind != Kind::array) throw parse_error("config value is not an array");
    std::vector<double> out;
    out.reserve(arr.size());
    for (const auto& v : arr) out.push_back(v.as_double());
    return out;
  }
};

using Table = std::map<std::string, Value>;

namespace detail {

inline std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline std::string strip_comment(const std::string& line) {
  bool in_str = false;
  for (size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') in_str = !in_str;
    if (line[i] == '#' && !in_str) return line.substr(0, i);
  }
  return line;
}

inline Value parse_scalar(const std::string& raw, int lineno) {
  std::string t = trim(raw);
  if (t.empty()) throw parse_error("line " + std::to_string(lineno) + ": empty value");
  Value v;
  if (t.front() == '"') {
    if (t.size() < 2 || t.back() != '"')
      throw parse_error("line " + std::to_string(lineno) + ": unterminated string");
    v.kind = Value::Kind::str;
    v.s = t.substr(1, t.size() - 2);
    return v;
  }
  if (t == "true" || t == "false") {
    v.kind = Value::Kind::boolean;
    v.b = (t == "true");
    return v;
  }
  const bool looks_float = t.find_first_of(".eE") != std::string::npos &&
                           t.find_first_not_of("+-0123456789.eE") == std::string::npos;
  try {
    size_t pos = 0;
    if (!looks_float) {
      long long i = std::stoll(t, &pos);
      if (pos == t.size()) {
        v.kind = Value::Kind::integer;
        v.i = i;
        return v;
      }
    }
    double f = std::stod(t, &pos);
    if (pos == t.size()) {
      v.kind = Value::Kind::real;
      v.f = f;
      return v;
    }
  } catch (...) {
  }
  throw parse_error("line " + std::to_string(lineno) + ": cannot parse value '" + t + "'");
}

inline Value parse_value(const std::string& raw, int lineno) {
  std::string t = trim(raw);
  if (!t.empty() && t.front() == '[') {
    if (t.back() != ']')
      throw parse_error("line " + std::to_string(lineno) + ": unterminated array");
    Value v;
    v.kind = Value::Kind::array;
    std::string body = t.substr(1, t.size() - 2);
    std::string item;
    bool in_str = false;
    for (char c : body) {
      if (c == '"') in_str = !in_str;
      if (c == ',' && !in_str) {
        if (!trim(item).empty()) v.arr.push_back(parse_scalar(item, lineno));
        item.clear();
      } else {
        item += c;
      }
    }
    if (!trim(item).empty()) v.arr.push_back(parse_scalar(item, lineno));
    return v;
  }
  return parse_scalar(t, lineno);
}

}  // namespace detail

inline Table parse(const std::string& content) {
  Table table;
  std::istringstream in(content);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = detail::trim(detail::strip_comment(line));
    if (t.empty()) continue;
    if (t.front() == '[') {
      if (t.back() != ']')
        throw parse_error("line " + std::to_string(lineno) + ": malformed section header");
      section = detail::trim(t.substr(1, t.size() - 2));
      if (section.empty())
        throw parse_error("line " + std::to_string(lineno) + ": empty section name");
      continue;
    }
    size_t eq = std::string::npos;
    bool in_str = false;
    for (size_t i = 0; i < t.size(); ++i) {
      if (t[i] == '"') in_str = !in_str;
      if (t[i] == '=' && !in_str) {
        eq = i;
        break;
      }
    }
    if (eq == std::string::npos)
      throw parse_error("line " + std::to_string(lineno) + ": expected key = value");
    std::string key = detail::trim(t.substr(0, eq));
    if (key.empty())
      throw parse_error("line " + std::to_string(lineno) + ": empty key");
    std::string full = section.empty() ? key : section + "." + key;
    if (table.count(full))
      throw parse_error("line " + std::to_string(lineno) + ": duplicate key '" + full + "'");
    table[full] = detail::parse_value(t.substr(eq + 1), lineno);
  }
  return table;
}

inline Table parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw parse_error("cannot open config: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace netcausal::toml
