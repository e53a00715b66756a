#pragma once

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "vnhc/errors.hpp"

namespace vnhc {

/// Everything a run needs, collected from a config file and/or CLI flags.
/// Optional fields fall back to per-scenario defaults.
struct RunConfig {
  std::string mode = "run";  ///< run | drift | chetaev | check | decay
  std::string scenario;      ///< preset name; required except in decay mode
  std::optional<double> dt;
  std::optional<double> t_final;
  std::optional<std::vector<double>> gains;
  std::string out_dir = ".";
  bool plot_script = false;

  std::optional<std::string> input;  ///< decay mode: trajectory CSV to read
  std::optional<std::pair<double, double>> window;  ///< decay fit window

  // scenario parameter overrides
  std::optional<std::vector<double>> flocking_masses;
  std::optional<double> flocking_gravity;
  std::optional<std::vector<double>> flocking_q0, flocking_v0;
  std::optional<double> usv_mass, usv_inertia;
  std::optional<std::string> usv_current;  ///< northeast | anticyclone
  std::optional<std::vector<double>> usv_q0, usv_v0;
};

namespace detail {

struct ConfigToken {
  std::string text;
  int line = 0;
  int column = 0;
};

inline double to_double(const ConfigToken& tok) {
  const char* begin = tok.text.c_str();
  char* end = nullptr;
  const double x = std::strtod(begin, &end);
  if (end == begin || *end != '\0')
    throw ParseError("expected a number, got '" + tok.text + "'", tok.line,
                     tok.column);
  return x;
}

}  // namespace detail

/// Parses the line-oriented `key = value` config grammar:
///   - `#` starts a comment, blank lines are ignored
///   - values are a bare token or a bracketed list `[a, b, c]`
///   - keys may be dotted (scenario parameter overrides)
/// Unknown and duplicate keys are rejected. Grammar details live in the
/// README.
inline RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string raw;
  int lineno = 0;

  auto value_error = [](const detail::ConfigToken& tok, const std::string& what) {
    return ValidationError("config line " + std::to_string(tok.line) + ": " +
                           what);
  };

  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = raw;
    if (const auto hash = line.find('#'); hash != std::string::npos)
      line.erase(hash);
    auto is_space = [](char c) {
      return std::isspace(static_cast<unsigned char>(c)) != 0;
    };
    size_t b = 0, e = line.size();
    while (b < e && is_space(line[b])) ++b;
    while (e > b && is_space(line[e - 1])) --e;
    if (b == e) continue;
    line = line.substr(b, e - b);
    const int key_col = static_cast<int>(b) + 1;

    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError("expected 'key = value'", lineno, key_col);
    std::string key = line.substr(0, eq);
    std::string value = line.substr(eq + 1);
    auto trim = [&](std::string& s) {
      size_t x = 0, y = s.size();
      while (x < y && is_space(s[x])) ++x;
      while (y > x && is_space(s[y - 1])) --y;
      s = s.substr(x, y - x);
    };
    trim(key);
    trim(value);
    if (key.empty()) throw ParseError("missing key", lineno, key_col);
    if (value.empty())
      throw ParseError("missing value for '" + key + "'", lineno,
                       static_cast<int>(eq) + key_col + 1);
    for (char ch : key)
      if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' ||
            ch == '.' || ch == '-'))
        throw ParseError("bad character in key '" + key + "'", lineno,
                         key_col);
    if (!seen.insert(key).second)
      throw ParseError("duplicate key '" + key + "'", lineno, key_col);

    detail::ConfigToken scalar{value, lineno,
                               static_cast<int>(eq) + key_col + 1};
    auto as_list = [&]() {
      if (value.front() != '[' || value.back() != ']')
        throw ParseError("expected a bracketed list for '" + key + "'", lineno,
                         scalar.column);
      std::vector<double> out;
      std::string inner = value.substr(1, value.size() - 2);
      std::stringstream ss(inner);
      std::string field;
      while (std::getline(ss, field, ',')) {
        detail::ConfigToken tok{field, lineno, scalar.column};
        trim(tok.text);
        if (tok.text.empty())
          throw ParseError("empty list element for '" + key + "'", lineno,
                           scalar.column);
        out.push_back(detail::to_double(tok));
      }
      if (out.empty())
        throw ParseError("empty list for '" + key + "'", lineno,
                         scalar.column);
      return out;
    };

    if (key == "mode") {
      cfg.mode = value;
    } else if (key == "scenario") {
      cfg.scenario = value;
    } else if (key == "dt") {
      cfg.dt = detail::to_double(scalar);
    } else if (key == "t_final") {
      cfg.t_final = detail::to_double(scalar);
    } else if (key == "gains") {
      cfg.gains = as_list();
    } else if (key == "out") {
      cfg.out_dir = value;
    } else if (key == "plot_script") {
      if (value == "true")
        cfg.plot_script = true;
      else if (value == "false")
        cfg.plot_script = false;
      else
        throw value_error(scalar, "plot_script must be true or false");
    } else if (key == "input") {
      cfg.input = value;
    } else if (key == "window") {
      const auto w = as_list();
      if (w.size() != 2)
        throw value_error(scalar, "window needs exactly [t0, t1]");
      cfg.window = std::make_pair(w[0], w[1]);
    } else if (key == "flocking.masses") {
      cfg.flocking_masses = as_list();
    } else if (key == "flocking.g") {
      cfg.flocking_gravity = detail::to_double(scalar);
    } else if (key == "flocking.q0") {
      cfg.flocking_q0 = as_list();
    } else if (key == "flocking.v0") {
      cfg.flocking_v0 = as_list();
    } else if (key == "usv.mass") {
      cfg.usv_mass = detail::to_double(scalar);
    } else if (key == "usv.inertia") {
      cfg.usv_inertia = detail::to_double(scalar);
    } else if (key == "usv.current") {
      cfg.usv_current = value;
    } else if (key == "usv.q0") {
      cfg.usv_q0 = as_list();
    } else if (key == "usv.v0") {
      cfg.usv_v0 = as_list();
    } else {
      throw ParseError("unknown key '" + key + "'", lineno, key_col);
    }
  }
  return cfg;
}

inline RunConfig parse_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace vnhc
