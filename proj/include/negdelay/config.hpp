#pragma once

// Flat `section.key = value` run configuration. Units live in key names.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "negdelay/errors.hpp"
#include "negdelay/format.hpp"
#include "negdelay/medium.hpp"
#include "negdelay/montecarlo.hpp"
#include "negdelay/pulse.hpp"

namespace negdelay {

struct CampaignSpec {
  std::size_t n_cycles = 100;
  std::uint64_t seed = 1;
};

struct OracleSpec {
  int n_atoms = 64;
  std::size_t checkpoint_interval = 64;
};

struct AnalysisSpec {
  double window_fraction = 0.3;
};

struct SweepSpec {
  std::vector<double> sigma_rms_ns{10, 18, 27, 36};
  std::vector<double> od{2, 4};
};

struct RunConfig {
  MediumSpec medium;
  PulseSpec pulse;
  ShotConfig shot;
  CampaignSpec campaign;
  OracleSpec oracle;
  AnalysisSpec analysis;
  SweepSpec sweep;

  void validate() const {
    medium.validate();
    if (!(pulse.sigma_rms > 0.0)) throw ConfigError("pulse.sigma_rms_ns must be > 0");
    shot.validate();
    if (oracle.n_atoms < 1) throw ConfigError("oracle.n_atoms must be >= 1");
    if (oracle.checkpoint_interval < 1) throw ConfigError("oracle.checkpoint_interval must be >= 1");
    if (!(analysis.window_fraction >= 0.0 && analysis.window_fraction < 1.0))
      throw ConfigError("analysis.window_fraction must lie in [0, 1)");
    for (double s : sweep.sigma_rms_ns)
      if (!(s > 0.0)) throw ConfigError("sweep.sigma_rms_ns entries must be > 0");
    for (double o : sweep.od)
      if (!(o >= 0.0)) throw ConfigError("sweep.od entries must be >= 0");
  }

  /// Pulse as seen by the medium; photon number is a shot property.
  [[nodiscard]] PulseSpec pulse_spec() const {
    PulseSpec p = pulse;
    p.mean_photons = shot.mean_photons;
    return p;
  }

  [[nodiscard]] std::string canonical_text() const;
  [[nodiscard]] std::uint64_t hash() const { return fnv1a64(canonical_text()); }
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline double parse_number(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size() || !std::isfinite(out))
    throw ConfigError("key '" + key + "': expected a number, got '" + v + "'");
  return out;
}

inline std::uint64_t parse_unsigned(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size())
    throw ConfigError("key '" + key + "': expected a non-negative integer, got '" + v + "'");
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  throw ConfigError("key '" + key + "': expected true/false, got '" + v + "'");
}

inline std::vector<double> parse_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  for (std::string item; std::getline(ss, item, ',');) out.push_back(parse_number(key, trim(item)));
  if (out.empty()) throw ConfigError("key '" + key + "': empty list");
  return out;
}

inline std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_double(v[i]);
  return s;
}

}  // namespace detail

/// key -> (setter, getter) over a RunConfig, in canonical order.
struct ConfigField {
  std::string key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

inline const std::vector<ConfigField>& config_fields() {
  static const std::vector<ConfigField> fields = [] {
    std::vector<ConfigField> f;
    auto num = [&f](std::string key, auto member_get, double scale = 1.0) {
      f.push_back({key,
                   [key, member_get, scale](RunConfig& c, const std::string& v) {
                     member_get(c) = detail::parse_number(key, v) * scale;
                   },
                   [member_get, scale](const RunConfig& c) {
                     return format_double(member_get(c) / scale);
                   }});
    };
    auto uns = [&f](std::string key, auto member_get) {
      f.push_back({key,
                   [key, member_get](RunConfig& c, const std::string& v) {
                     using T = std::remove_reference_t<decltype(member_get(c))>;
                     member_get(c) = static_cast<T>(detail::parse_unsigned(key, v));
                   },
                   [member_get](const RunConfig& c) {
                     return std::to_string(member_get(c));
                   }});
    };
    auto flag = [&f](std::string key, auto member_get) {
      f.push_back({key,
                   [key, member_get](RunConfig& c, const std::string& v) {
                     member_get(c) = detail::parse_bool(key, v);
                   },
                   [member_get](const RunConfig& c) {
                     return std::string(member_get(c) ? "true" : "false");
                   }});
    };
    auto list = [&f](std::string key, auto member_get) {
      f.push_back({key,
                   [key, member_get](RunConfig& c, const std::string& v) {
                     member_get(c) = detail::parse_list(key, v);
                   },
                   [member_get](const RunConfig& c) {
                     return detail::join(member_get(c));
                   }});
    };
    constexpr double ns = 1e-9, mhz = kTwoPi * 1e6;

    num("medium.od", [](auto& c) -> auto& { return c.medium.od; });
    f.push_back({"medium.tau_sp_ns",
                 [](RunConfig& c, const std::string& v) {
                   const double tau = detail::parse_number("medium.tau_sp_ns", v);
                   if (!(tau > 0.0)) throw ConfigError("key 'medium.tau_sp_ns' must be > 0");
                   c.medium.gamma = 1.0 / (tau * ns);
                 },
                 [](const RunConfig& c) { return format_double(1.0 / c.medium.gamma / ns); }});
    f.push_back({"medium.gamma_MHz",
                 [](RunConfig& c, const std::string& v) {
                   const double g = detail::parse_number("medium.gamma_MHz", v);
                   if (!(g > 0.0)) throw ConfigError("key 'medium.gamma_MHz' must be > 0");
                   c.medium.gamma = g * mhz;
                 },
                 nullptr});
    f.push_back({"medium.probe_detuning_MHz",
                 [](RunConfig& c, const std::string& v) {
                   const double d = detail::parse_number("medium.probe_detuning_MHz", v) * mhz;
                   c.medium.probe_detuning = d;
                   c.medium.omega_probe = c.medium.omega_atom + d;
                 },
                 [](const RunConfig& c) { return format_double(c.medium.probe_detuning / mhz); }});
    num("medium.sigma0_over_area", [](auto& c) -> auto& { return c.medium.sigma0_over_area; });
    uns("medium.n_slabs", [](auto& c) -> auto& { return c.medium.n_slabs; });

    num("pulse.sigma_rms_ns", [](auto& c) -> auto& { return c.pulse.sigma_rms; }, ns);
    num("pulse.mean_photons", [](auto& c) -> auto& { return c.shot.mean_photons; });

    num("shot.window_ns", [](auto& c) -> auto& { return c.shot.window; }, ns);
    uns("shot.n_samples", [](auto& c) -> auto& { return c.shot.n_samples; });
    num("shot.dt_ns", [](auto& c) -> auto& { return c.shot.dt; }, ns);
    num("shot.window_start_ns", [](auto& c) -> auto& { return c.shot.window_start; }, ns);
    num("shot.target_click_prob", [](auto& c) -> auto& { return c.shot.target_click_prob; });
    num("shot.phase_noise_mrad", [](auto& c) -> auto& { return c.shot.phase_noise_rms; }, 1e-3);
    num("shot.background_click_fraction",
        [](auto& c) -> auto& { return c.shot.background_click_fraction; });
    flag("shot.lowpass_enabled", [](auto& c) -> auto& { return c.shot.lowpass_enabled; });
    num("shot.lowpass_cutoff_MHz", [](auto& c) -> auto& { return c.shot.lowpass_cutoff; }, 1e6);
    uns("shot.shots_per_cycle", [](auto& c) -> auto& { return c.shot.shots_per_cycle; });
    flag("shot.wobble_enabled", [](auto& c) -> auto& { return c.shot.wobble.enabled; });
    num("shot.wobble_amplitude_urad", [](auto& c) -> auto& { return c.shot.wobble.amplitude; }, 1e-6);
    num("shot.wobble_frequency_MHz", [](auto& c) -> auto& { return c.shot.wobble.frequency; }, 1e6);
    num("shot.wobble_phase_rad", [](auto& c) -> auto& { return c.shot.wobble.phase; });
    num("shot.wobble_modulation", [](auto& c) -> auto& { return c.shot.wobble.modulation; });

    uns("campaign.n_cycles", [](auto& c) -> auto& { return c.campaign.n_cycles; });
    uns("campaign.seed", [](auto& c) -> auto& { return c.campaign.seed; });

    uns("oracle.n_atoms", [](auto& c) -> auto& { return c.oracle.n_atoms; });
    uns("oracle.checkpoint_interval", [](auto& c) -> auto& { return c.oracle.checkpoint_interval; });

    num("analysis.window_fraction", [](auto& c) -> auto& { return c.analysis.window_fraction; });

    list("sweep.sigma_rms_ns", [](auto& c) -> auto& { return c.sweep.sigma_rms_ns; });
    list("sweep.od", [](auto& c) -> auto& { return c.sweep.od; });
    return f;
  }();
  return fields;
}

inline std::string RunConfig::canonical_text() const {
  std::string out;
  for (const auto& f : config_fields())
    if (f.get) out += f.key + " = " + f.get(*this) + "\n";
  return out;
}

/// Parses configuration text on top of the defaults.
inline RunConfig parse_config(std::string_view text, std::string_view origin = "<config>") {
  RunConfig cfg;
  std::map<std::string, const ConfigField*> by_key;
  for (const auto& f : config_fields()) by_key[f.key] = &f;
  std::map<std::string, int> seen;
  std::istringstream in{std::string(text)};
  int lineno = 0;
  for (std::string line; std::getline(in, line);) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string body = detail::trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    const std::string where = std::string(origin) + ":" + std::to_string(lineno);
    if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
    const std::string key = detail::trim(std::string_view(body).substr(0, eq));
    const std::string value = detail::trim(std::string_view(body).substr(eq + 1));
    const auto it = by_key.find(key);
    if (it == by_key.end()) throw ConfigError(where + ": unknown key '" + key + "'");
    if (auto [pos, fresh] = seen.emplace(key, lineno); !fresh)
      throw ConfigError(where + ": duplicate key '" + key + "' (first set on line " +
                        std::to_string(pos->second) + ")");
    if (value.empty()) throw ConfigError(where + ": key '" + key + "' has no value");
    it->second->set(cfg, value);
  }
  if (seen.count("medium.tau_sp_ns") && seen.count("medium.gamma_MHz"))
    throw ConfigError("keys 'medium.tau_sp_ns' and 'medium.gamma_MHz' are mutually exclusive");
  cfg.validate();
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

}  // namespace negdelay
