#pragma once

// Scenario configuration: a flat `key = value` text file describing the
// floor, APs, propagation, device profiles, collection and test protocol.
//
//   env.width = 20
//   env.height = 15
//   env.grid_spacing = 1
//   ap = 0, 2, 2, rts            (id, x, y, rts|nors); repeatable
//   prop.pathloss_exponent = 3
//   device = samsung_s6          starts a device block; device.<field> keys
//   device.tx_offset_mean = 1    apply to the most recent device
//   collect.dwell = 2
//   test.duration = 120
//   test.waypoints = 0 1 1; 5 4 1   (t x y; ...) optional fixed route
//   seeds = 1, 2, 3
//
// Unset keys keep their defaults; an absent device list means the four
// built-in handset profiles.

#include "passloc/airsim.hpp"
#include "passloc/core.hpp"
#include "passloc/csi.hpp"
#include "passloc/detail/text.hpp"
#include "passloc/kde.hpp"
#include "passloc/ssp.hpp"

#include <functional>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace passloc {

struct CollectionConfig
{
  double dwell = 2.0;            // s per RP per device per session, inactive + RTS
  std::size_t sessions = 2;      // repeated visits ("different days")
  double rts_interval = 0.2;     // s per rts-capable AP
};

struct TestConfig
{
  double duration = 120.0; // s per test trajectory
  double speed_min = 0.6;
  double speed_max = 4.0;
  std::string route = "random"; // random | lawnmower | fixed
  std::size_t lawnmower_rows = 4;
  std::vector<Waypoint> waypoints; // for route = fixed
};

struct Scenario
{
  Environment env;
  airsim::PropagationModel prop;
  std::vector<airsim::DeviceProfile> devices = airsim::default_devices();
  CollectionConfig collect;
  TestConfig test;
  double delta_t = 1.0;
  double rts_interval = 0.2;
  std::vector<std::uint64_t> seeds{1};
  kde::KernelSpec kernel{};
  ssp::SspConfig ssp{};
  csi::RefineConfig refine{};

  void validate() const
  {
    env.validate();
    prop.validate();
    if (devices.empty())
      throw Error(Errc::invalid_argument, "scenario has no devices");
    for (const auto& d : devices)
      d.validate();
    kernel.validate();
    ssp.window.validate();
    if (!(delta_t > 0.0) || !(rts_interval > 0.0))
      throw Error(Errc::invalid_argument, "delta_t and rts_interval must be > 0");
    if (!(collect.dwell > 0.0) || collect.sessions < 1)
      throw Error(Errc::invalid_argument, "collection needs dwell > 0 and >= 1 session");
    if (!(test.duration > 0.0) || !(test.speed_min > 0.0) || test.speed_max < test.speed_min)
      throw Error(Errc::invalid_argument, "bad test trajectory settings");
  }
};

//! 20 m x 15 m floor, 1 m grid (300 RPs), four APs of which two answer RTS.
inline Scenario desk_scenario()
{
  Scenario s;
  s.env.width = 20.0;
  s.env.height = 15.0;
  s.env.grid_spacing = 1.0;
  s.env.aps = {{0, {2.0, 2.0}, true}, {1, {18.0, 3.0}, false}, {2, {3.0, 13.0}, false}, {3, {17.0, 12.5}, true}};
  s.env.rps = grid_rps(s.env.width, s.env.height, s.env.grid_spacing);
  s.ssp.window.d_max = s.test.speed_max * s.delta_t;
  s.ssp.window.sigma = s.ssp.window.d_max;
  return s;
}

namespace detail {

inline std::vector<std::uint64_t> parse_seed_list(const std::string& v)
{
  std::vector<std::uint64_t> out;
  for (const auto& tok : split(v, ',')) {
    if (tok.empty())
      continue;
    const auto dash = tok.find('-', 1);
    if (dash == std::string::npos) {
      out.push_back(static_cast<std::uint64_t>(parse_int(tok)));
      continue;
    }
    // inclusive range a-b
    const auto a = parse_int(tok.substr(0, dash));
    const auto b = parse_int(tok.substr(dash + 1));
    if (a < 0 || b < a)
      throw Error(Errc::parse_error, "bad seed range '" + tok + "'");
    for (auto x = a; x <= b; ++x)
      out.push_back(static_cast<std::uint64_t>(x));
  }
  return out;
}

inline kde::KernelKind kernel_kind_from(const std::string& s)
{
  if (s == "gaussian")
    return kde::KernelKind::gaussian;
  if (s == "epanechnikov")
    return kde::KernelKind::epanechnikov;
  if (s == "tophat")
    return kde::KernelKind::tophat;
  throw Error(Errc::parse_error, "unknown kernel '" + s + "'");
}

inline const char* to_string(kde::KernelKind k)
{
  switch (k) {
    case kde::KernelKind::gaussian: return "gaussian";
    case kde::KernelKind::epanechnikov: return "epanechnikov";
    case kde::KernelKind::tophat: return "tophat";
  }
  return "?";
}

inline ssp::WindowShape window_shape_from(const std::string& s)
{
  if (s == "gaussian")
    return ssp::WindowShape::gaussian;
  if (s == "hann")
    return ssp::WindowShape::hann;
  if (s == "tukey")
    return ssp::WindowShape::tukey;
  throw Error(Errc::parse_error, "unknown window '" + s + "'");
}

inline const char* to_string(ssp::WindowShape w)
{
  switch (w) {
    case ssp::WindowShape::gaussian: return "gaussian";
    case ssp::WindowShape::hann: return "hann";
    case ssp::WindowShape::tukey: return "tukey";
  }
  return "?";
}

} // namespace detail

inline Scenario parse_scenario(std::istream& in)
{
  using namespace detail;
  Scenario s;
  s.env = {};
  bool custom_devices = false;
  bool have_rps = false;
  bool window_set = false;
  auto num = [](const std::string& v) { return parse_double(v); };

  const std::map<std::string, std::function<void(const std::string&)>> scalar = {
    {"env.width", [&](const std::string& v) { s.env.width = num(v); }},
    {"env.height", [&](const std::string& v) { s.env.height = num(v); }},
    {"env.grid_spacing", [&](const std::string& v) { s.env.grid_spacing = num(v); }},
    {"prop.pl0", [&](const std::string& v) { s.prop.pl0 = num(v); }},
    {"prop.pathloss_exponent", [&](const std::string& v) { s.prop.pathloss_exponent = num(v); }},
    {"prop.shadowing_sigma", [&](const std::string& v) { s.prop.shadowing_sigma = num(v); }},
    {"prop.shadow_cell", [&](const std::string& v) { s.prop.shadow_cell = num(v); }},
    {"prop.fast_fading_sigma", [&](const std::string& v) { s.prop.fast_fading_sigma = num(v); }},
    {"prop.sensitivity", [&](const std::string& v) { s.prop.sensitivity = num(v); }},
    {"prop.seed", [&](const std::string& v) { s.prop.seed = static_cast<std::uint64_t>(parse_int(v)); }},
    {"prop.reflection_gain", [&](const std::string& v) { s.prop.reflection_gain = num(v); }},
    {"prop.csi_reflectors", [&](const std::string& v) { s.prop.csi_reflectors = static_cast<std::size_t>(parse_int(v)); }},
    {"prop.csi_delay_scale", [&](const std::string& v) { s.prop.csi_delay_scale = num(v); }},
    {"prop.csi_spatial_wavelength", [&](const std::string& v) { s.prop.csi_spatial_wavelength = num(v); }},
    {"prop.csi_noise_near", [&](const std::string& v) { s.prop.csi_noise_near = num(v); }},
    {"prop.csi_noise_per_m", [&](const std::string& v) { s.prop.csi_noise_per_m = num(v); }},
    {"prop.csi_random_phase", [&](const std::string& v) { s.prop.csi_random_phase = parse_bool(v); }},
    {"prop.csi_orientation_gain", [&](const std::string& v) { s.prop.csi_orientation_gain = num(v); }},
    {"collect.dwell", [&](const std::string& v) { s.collect.dwell = num(v); }},
    {"collect.sessions", [&](const std::string& v) { s.collect.sessions = static_cast<std::size_t>(parse_int(v)); }},
    {"collect.rts_interval", [&](const std::string& v) { s.collect.rts_interval = num(v); }},
    {"test.duration", [&](const std::string& v) { s.test.duration = num(v); }},
    {"test.speed_min", [&](const std::string& v) { s.test.speed_min = num(v); }},
    {"test.speed_max", [&](const std::string& v) { s.test.speed_max = num(v); }},
    {"test.route", [&](const std::string& v) { s.test.route = v; }},
    {"test.lawnmower_rows", [&](const std::string& v) { s.test.lawnmower_rows = static_cast<std::size_t>(parse_int(v)); }},
    {"delta_t", [&](const std::string& v) { s.delta_t = num(v); }},
    {"rts_interval", [&](const std::string& v) { s.rts_interval = num(v); }},
    {"seeds", [&](const std::string& v) { s.seeds = parse_seed_list(v); }},
    {"kde.kernel", [&](const std::string& v) { s.kernel.kind = kernel_kind_from(v); }},
    {"kde.bandwidth", [&](const std::string& v) { s.kernel.bandwidth = num(v); }},
    {"ssp.window", [&](const std::string& v) { s.ssp.window.shape = window_shape_from(v); }},
    {"ssp.sigma", [&](const std::string& v) { s.ssp.window.sigma = num(v); window_set = true; }},
    {"ssp.d_max", [&](const std::string& v) { s.ssp.window.d_max = num(v); window_set = true; }},
    {"ssp.tukey_alpha", [&](const std::string& v) { s.ssp.window.tukey_alpha = num(v); }},
    {"ssp.k", [&](const std::string& v) { s.ssp.k = static_cast<std::size_t>(parse_int(v)); }},
    {"csi.strongest_aps", [&](const std::string& v) { s.refine.strongest_aps = static_cast<std::size_t>(parse_int(v)); }},
    {"csi.w_amp", [&](const std::string& v) { s.refine.w_amp = num(v); }},
    {"csi.w_phase", [&](const std::string& v) { s.refine.w_phase = num(v); }},
  };

  auto device_field = [&](airsim::DeviceProfile& d, const std::string& field, const std::string& v) {
    if (field == "mac") d.mac = v;
    else if (field == "tx_offset_mean") d.tx_offset_mean = num(v);
    else if (field == "tx_offset_sigma") d.tx_offset_sigma = num(v);
    else if (field == "rssi_min") d.rssi_min = num(v);
    else if (field == "rssi_max") d.rssi_max = num(v);
    else if (field == "cts_response_prob") d.cts_response_prob = num(v);
    else if (field == "rts_reply_per_minute_scale") d.rts_reply_per_minute_scale = num(v);
    else if (field == "data_frame_rate") d.data_frame_rate = num(v);
    else if (field == "burst_weight") d.inactive_arrival.burst_weight = num(v);
    else if (field == "burst_median") d.inactive_arrival.burst_median = num(v);
    else if (field == "burst_sigma") d.inactive_arrival.burst_sigma = num(v);
    else if (field == "silence_median") d.inactive_arrival.silence_median = num(v);
    else if (field == "silence_sigma") d.inactive_arrival.silence_sigma = num(v);
    else if (field == "screen_off_scale") d.inactive_arrival.screen_off_scale = num(v);
    else throw Error(Errc::parse_error, "unknown device field '" + field + "'");
  };

  for (const auto& [key, value] : read_key_values(in)) {
    if (auto it = scalar.find(key); it != scalar.end()) {
      it->second(value);
    } else if (key == "ap") {
      const auto f = split(value, ',');
      if (f.size() != 4)
        throw Error(Errc::parse_error, "ap needs id, x, y, rts|nors");
      s.env.aps.push_back({static_cast<ApId>(parse_int(f[0])), {num(f[1]), num(f[2])}, parse_bool(f[3])});
    } else if (key == "rp") {
      const auto f = split(value, ',');
      if (f.size() != 3)
        throw Error(Errc::parse_error, "rp needs id, x, y");
      s.env.rps.push_back({static_cast<RpId>(parse_int(f[0])), {num(f[1]), num(f[2])}});
      have_rps = true;
    } else if (key == "device") {
      if (!custom_devices) {
        s.devices.clear();
        custom_devices = true;
      }
      // Start from the built-in profile of the same name when there is one.
      airsim::DeviceProfile d;
      for (const auto& builtin : airsim::default_devices())
        if (builtin.model_name == value)
          d = builtin;
      d.model_name = value;
      if (d.mac.empty())
        d.mac = "02:00:00:00:01:" + std::to_string(10 + s.devices.size());
      s.devices.push_back(d);
    } else if (key.rfind("device.", 0) == 0) {
      if (s.devices.empty() || !custom_devices)
        throw Error(Errc::parse_error, "'" + key + "' before any 'device =' line");
      device_field(s.devices.back(), key.substr(7), value);
    } else if (key == "test.waypoints") {
      s.test.waypoints.clear();
      for (const auto& wp : split(value, ';')) {
        if (wp.empty())
          continue;
        std::istringstream ws(wp);
        Waypoint w;
        if (!(ws >> w.t >> w.location.x >> w.location.y))
          throw Error(Errc::parse_error, "waypoint needs 't x y': " + wp);
        s.test.waypoints.push_back(w);
      }
    } else {
      throw Error(Errc::parse_error, "unknown scenario key '" + key + "'");
    }
  }
  if (!have_rps)
    s.env.rps = grid_rps(s.env.width, s.env.height, s.env.grid_spacing);
  if (!window_set) {
    s.ssp.window.d_max = s.test.speed_max * s.delta_t;
    s.ssp.window.sigma = s.ssp.window.d_max;
  }
  s.validate();
  return s;
}

inline void write_scenario(std::ostream& out, const Scenario& s)
{
  using detail::fmt_g;
  auto g = [](double v) { return fmt_g(v, 9); };
  out << "# passloc scenario\n";
  out << "env.width = " << g(s.env.width) << "\n";
  out << "env.height = " << g(s.env.height) << "\n";
  out << "env.grid_spacing = " << g(s.env.grid_spacing) << "\n";
  for (const auto& ap : s.env.aps)
    out << "ap = " << ap.id << ", " << g(ap.location.x) << ", " << g(ap.location.y) << ", "
        << (ap.rts_capable ? "rts" : "nors") << "\n";
  const auto grid = grid_rps(s.env.width, s.env.height, s.env.grid_spacing);
  if (!(grid == s.env.rps))
    for (const auto& rp : s.env.rps)
      out << "rp = " << rp.id << ", " << g(rp.location.x) << ", " << g(rp.location.y) << "\n";
  const auto& p = s.prop;
  out << "prop.pl0 = " << g(p.pl0) << "\n";
  out << "prop.pathloss_exponent = " << g(p.pathloss_exponent) << "\n";
  out << "prop.shadowing_sigma = " << g(p.shadowing_sigma) << "\n";
  out << "prop.shadow_cell = " << g(p.shadow_cell) << "\n";
  out << "prop.fast_fading_sigma = " << g(p.fast_fading_sigma) << "\n";
  out << "prop.sensitivity = " << g(p.sensitivity) << "\n";
  out << "prop.seed = " << p.seed << "\n";
  out << "prop.reflection_gain = " << g(p.reflection_gain) << "\n";
  out << "prop.csi_reflectors = " << p.csi_reflectors << "\n";
  out << "prop.csi_delay_scale = " << g(p.csi_delay_scale) << "\n";
  out << "prop.csi_spatial_wavelength = " << g(p.csi_spatial_wavelength) << "\n";
  out << "prop.csi_noise_near = " << g(p.csi_noise_near) << "\n";
  out << "prop.csi_noise_per_m = " << g(p.csi_noise_per_m) << "\n";
  out << "prop.csi_random_phase = " << (p.csi_random_phase ? "true" : "false") << "\n";
  out << "prop.csi_orientation_gain = " << g(p.csi_orientation_gain) << "\n";
  for (const auto& d : s.devices) {
    out << "device = " << d.model_name << "\n";
    out << "device.mac = " << d.mac << "\n";
    out << "device.tx_offset_mean = " << g(d.tx_offset_mean) << "\n";
    out << "device.tx_offset_sigma = " << g(d.tx_offset_sigma) << "\n";
    out << "device.rssi_min = " << g(d.rssi_min) << "\n";
    out << "device.rssi_max = " << g(d.rssi_max) << "\n";
    out << "device.cts_response_prob = " << g(d.cts_response_prob) << "\n";
    out << "device.rts_reply_per_minute_scale = " << g(d.rts_reply_per_minute_scale) << "\n";
    out << "device.data_frame_rate = " << g(d.data_frame_rate) << "\n";
    out << "device.burst_weight = " << g(d.inactive_arrival.burst_weight) << "\n";
    out << "device.burst_median = " << g(d.inactive_arrival.burst_median) << "\n";
    out << "device.burst_sigma = " << g(d.inactive_arrival.burst_sigma) << "\n";
    out << "device.silence_median = " << g(d.inactive_arrival.silence_median) << "\n";
    out << "device.silence_sigma = " << g(d.inactive_arrival.silence_sigma) << "\n";
    out << "device.screen_off_scale = " << g(d.inactive_arrival.screen_off_scale) << "\n";
  }
  out << "collect.dwell = " << g(s.collect.dwell) << "\n";
  out << "collect.sessions = " << s.collect.sessions << "\n";
  out << "collect.rts_interval = " << g(s.collect.rts_interval) << "\n";
  out << "test.duration = " << g(s.test.duration) << "\n";
  out << "test.speed_min = " << g(s.test.speed_min) << "\n";
  out << "test.speed_max = " << g(s.test.speed_max) << "\n";
  out << "test.route = " << s.test.route << "\n";
  out << "test.lawnmower_rows = " << s.test.lawnmower_rows << "\n";
  if (!s.test.waypoints.empty()) {
    out << "test.waypoints = ";
    for (std::size_t i = 0; i < s.test.waypoints.size(); ++i) {
      const auto& w = s.test.waypoints[i];
      out << (i ? "; " : "") << g(w.t) << " " << g(w.location.x) << " " << g(w.location.y);
    }
    out << "\n";
  }
  out << "delta_t = " << g(s.delta_t) << "\n";
  out << "rts_interval = " << g(s.rts_interval) << "\n";
  out << "seeds = ";
  for (std::size_t i = 0; i < s.seeds.size(); ++i)
    out << (i ? ", " : "") << s.seeds[i];
  out << "\n";
  out << "kde.kernel = " << detail::to_string(s.kernel.kind) << "\n";
  out << "kde.bandwidth = " << g(s.kernel.bandwidth) << "\n";
  out << "ssp.window = " << detail::to_string(s.ssp.window.shape) << "\n";
  out << "ssp.sigma = " << g(s.ssp.window.sigma) << "\n";
  out << "ssp.d_max = " << g(s.ssp.window.d_max) << "\n";
  out << "ssp.tukey_alpha = " << g(s.ssp.window.tukey_alpha) << "\n";
  out << "ssp.k = " << s.ssp.k << "\n";
  out << "csi.strongest_aps = " << s.refine.strongest_aps << "\n";
  out << "csi.w_amp = " << g(s.refine.w_amp) << "\n";
  out << "csi.w_phase = " << g(s.refine.w_phase) << "\n";
}

} // namespace passloc
