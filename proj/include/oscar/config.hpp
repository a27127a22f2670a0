#pragma once

// Flat `key = value` configuration with a [physical] or [dimensionless] block.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "oscar/params.hpp"

namespace oscar {

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what, int line = 0)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

enum class ConfigKind { physical, dimensionless };

namespace detail {

inline const std::set<std::string>& physical_keys() {
  static const std::set<std::string> keys{"k_s",    "omega_c_hz", "Q",           "mu0_mF",   "volume",
                                          "mu0_mF_per_V", "d",   "mu_bohr",     "gamma",    "B1",
                                          "delta_B", "amplitude_A", "force_F0", "B0",       "rho",
                                          "theta0", "drive_on"};
  return keys;
}

inline const std::set<std::string>& dimensionless_keys() {
  static const std::set<std::string> keys{"lambda", "chi", "epsilon", "delta", "Q",
                                          "alpha",  "rho", "theta0",  "drive_on"};
  return keys;
}

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double parse_number(std::string_view text, const std::string& key, int line) {
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double v = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ConfigError("key '" + key + "': not a number: '" + std::string(text) + "'", line);
  return v;
}

}  // namespace detail

/// Parsed configuration: the active block and its raw values.
struct Config {
  ConfigKind kind = ConfigKind::dimensionless;
  std::map<std::string, double> values;
  std::map<std::string, int> lines;  // key -> defining line (0 for overrides)
  std::string canonical;             // normalized text used for the provenance hash

  bool has(const std::string& key) const { return values.count(key) > 0; }

  double require(const std::string& key) const {
    const auto it = values.find(key);
    if (it == values.end())
      throw ConfigError("missing required key '" + key + "' in [" +
                        (kind == ConfigKind::physical ? "physical" : "dimensionless") + "]");
    return it->second;
  }
  double get_or(const std::string& key, double fallback) const {
    const auto it = values.find(key);
    return it == values.end() ? fallback : it->second;
  }

  /// Applies `key=value`; the key must belong to the active block.
  void set(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not of the form key=value");
    const std::string key(detail::trim(std::string_view(assignment).substr(0, eq)));
    const auto value = detail::trim(std::string_view(assignment).substr(eq + 1));
    const auto& known = kind == ConfigKind::physical ? detail::physical_keys() : detail::dimensionless_keys();
    if (!known.count(key)) throw ConfigError("override references unknown key '" + key + "'");
    values[key] = detail::parse_number(value, key, 0);
    lines[key] = 0;
    canonical += "set " + key + "=" + std::string(value) + "\n";
  }

  /// Extracts the physical parameter set; requires a [physical] block.
  PhysicalParams physical() const {
    if (kind != ConfigKind::physical) throw ConfigError("a [physical] configuration is required");
    PhysicalParams p;
    p.spring_constant = require("k_s");
    p.cantilever_frequency = 2.0 * std::numbers::pi * require("omega_c_hz");
    p.quality_factor = require("Q");
    if (has("mu0_mF")) {
      p.mu0_tip_moment = require("mu0_mF");
    } else if (has("volume") || has("mu0_mF_per_V")) {
      p.mu0_tip_moment = PhysicalParams::tip_moment_from_volume(require("volume"), require("mu0_mF_per_V"));
    } else {
      require("mu0_mF");
    }
    p.tip_sample_distance = require("d");
    p.spin_moment_bohr = require("mu_bohr");
    p.gyromagnetic_ratio = get_or("gamma", kElectronGyromagneticRatio);
    p.rf_field = require("B1");
    p.field_offset = get_or("delta_B", 0.0);
    if (has("amplitude_A") == has("force_F0"))
      throw ConfigError("exactly one of 'amplitude_A' and 'force_F0' must be given");
    p.drive = has("amplitude_A") ? DriveSpec::amplitude(require("amplitude_A")) : DriveSpec::force(require("force_F0"));
    if (has("B0")) p.base_field = require("B0");
    try {
      p.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    return p;
  }

  /// Dimensionless control set, converted from the physical block if needed.
  DimensionlessParams dimensionless() const {
    DimensionlessParams p;
    if (kind == ConfigKind::physical) {
      p = to_dimensionless(physical());
    } else {
      p.lambda = require("lambda");
      p.chi = require("chi");
      p.epsilon = require("epsilon");
      p.delta = get_or("delta", 0.0);
      p.quality_factor = require("Q");
      p.alpha = require("alpha");
    }
    p.rho = get_or("rho", 0.0);
    p.theta0 = get_or("theta0", 1.5 * std::numbers::pi);
    p.drive_on = get_or("drive_on", 1.0) != 0.0;
    try {
      p.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    return p;
  }
};

inline Config parse_config(std::istream& in) {
  Config cfg;
  std::optional<ConfigKind> section;
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line(raw);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("malformed section header", line_no);
      const auto name = detail::trim(line.substr(1, line.size() - 2));
      ConfigKind kind;
      if (name == "physical") kind = ConfigKind::physical;
      else if (name == "dimensionless") kind = ConfigKind::dimensionless;
      else throw ConfigError("unknown section [" + std::string(name) + "]", line_no);
      if (section) throw ConfigError("[physical] and [dimensionless] blocks are mutually exclusive", line_no);
      section = kind;
      cfg.kind = kind;
      cfg.canonical += "[" + std::string(name) + "]\n";
      continue;
    }
    if (!section) throw ConfigError("key outside a [physical] or [dimensionless] block", line_no);
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError("expected 'key = value'", line_no);
    const std::string key(detail::trim(line.substr(0, eq)));
    const auto value = detail::trim(line.substr(eq + 1));
    const auto& known = *section == ConfigKind::physical ? detail::physical_keys() : detail::dimensionless_keys();
    if (!known.count(key)) throw ConfigError("unknown key '" + key + "'", line_no);
    if (cfg.values.count(key)) throw ConfigError("duplicate key '" + key + "'", line_no);
    cfg.values[key] = detail::parse_number(value, key, line_no);
    cfg.lines[key] = line_no;
    cfg.canonical += key + "=" + std::string(value) + "\n";
  }
  if (!section) throw ConfigError("no [physical] or [dimensionless] block found");
  return cfg;
}

inline Config parse_config_string(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

inline Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return parse_config(in);
}

/// 64-bit FNV-1a, used to tag outputs with the configuration they came from.
inline std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace oscar
