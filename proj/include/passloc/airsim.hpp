#pragma once

// Frame-level radio simulator. Generates what the APs would capture from one
// phone: frame timing (background, RTS-elicited CTS, data/ACK), per-AP RSSI
// and, for data frames, CSI.

#include "passloc/core.hpp"
#include "passloc/csi_features.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

namespace passloc::airsim {

using Rng = std::mt19937_64;

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x)
{
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t hash_combine(std::uint64_t h, std::uint64_t v) { return splitmix64(h ^ splitmix64(v)); }

//! Standard normal keyed by a hash (Box-Muller on two derived uniforms).
inline double hashed_normal(std::uint64_t key)
{
  const std::uint64_t a = splitmix64(key);
  const std::uint64_t b = splitmix64(a);
  const double u1 = (static_cast<double>(a >> 11) + 0.5) * 0x1.0p-53;
  const double u2 = (static_cast<double>(b >> 11) + 0.5) * 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

inline double hashed_uniform(std::uint64_t key)
{
  return (static_cast<double>(splitmix64(key) >> 11) + 0.5) * 0x1.0p-53;
}

} // namespace detail

inline constexpr double kSpeedOfLight = 299792458.0;

struct PropagationModel
{
  double pl0 = -30.0;              // dBm received at 1 m
  double pathloss_exponent = 3.0;
  double shadowing_sigma = 4.0;    // dB, frozen spatial field
  double shadow_cell = 2.0;        // m, lattice spacing of the shadow field
  double fast_fading_sigma = 2.0;  // dB, i.i.d. per frame
  double sensitivity = -92.0;      // dBm, weaker frames are not captured
  std::uint64_t seed = 1;

  // CSI generator: direct ray plus reflections off frozen per-AP points.
  double carrier_hz = 2.412e9;
  double subcarrier_spacing_hz = 312.5e3;
  double reflection_gain = 0.8;
  std::size_t csi_reflectors = 4;
  double csi_delay_scale = 4.0; // stretches path delays across the band
  double csi_spatial_wavelength = 6.0; // m, sets how fast the ripple pattern moves with position
  double csi_noise_near = 0.02;        // relative noise at <= 1 m
  double csi_noise_per_m = 0.03;       // added relative noise per metre beyond 1 m
  bool csi_random_phase = true;        // per-packet common phase and timing slope
  double csi_orientation_gain = 0.15;  // per-session amplitude distortion depth

  void validate() const
  {
    if (!(pathloss_exponent >= 1.5 && pathloss_exponent <= 6.0))
      throw Error(Errc::invalid_argument, "path-loss exponent must lie in [1.5, 6]");
    if (shadowing_sigma < 0.0 || fast_fading_sigma < 0.0 || csi_noise_near < 0.0 || csi_noise_per_m < 0.0)
      throw Error(Errc::invalid_argument, "noise sigmas must be >= 0");
    if (!(shadow_cell > 0.0) || !(csi_spatial_wavelength > 0.0) || !(csi_delay_scale > 0.0))
      throw Error(Errc::invalid_argument, "shadow cell, CSI wavelength and delay scale must be > 0");
    if (reflection_gain < 0.0)
      throw Error(Errc::invalid_argument, "reflection gain must be >= 0");
  }

  //! All stochastic terms off.
  PropagationModel noiseless() const
  {
    PropagationModel p = *this;
    p.shadowing_sigma = 0.0;
    p.fast_fading_sigma = 0.0;
    p.csi_noise_near = 0.0;
    p.csi_noise_per_m = 0.0;
    p.csi_random_phase = false;
    p.csi_orientation_gain = 0.0;
    return p;
  }
};

//! Frozen log-normal shadowing, bilinearly interpolated between lattice nodes
//! whose values are keyed by (seed, ap, node).
inline double shadow_field(const PropagationModel& prop, ApId ap, const Location& pos)
{
  if (prop.shadowing_sigma == 0.0)
    return 0.0;
  const double gx = pos.x / prop.shadow_cell;
  const double gy = pos.y / prop.shadow_cell;
  const double fx = std::floor(gx);
  const double fy = std::floor(gy);
  const double tx = gx - fx;
  const double ty = gy - fy;
  auto node = [&](double i, double j) {
    std::uint64_t h = detail::hash_combine(prop.seed, 0x5ad0);
    h = detail::hash_combine(h, ap);
    h = detail::hash_combine(h, static_cast<std::uint64_t>(static_cast<std::int64_t>(i)));
    h = detail::hash_combine(h, static_cast<std::uint64_t>(static_cast<std::int64_t>(j)));
    return detail::hashed_normal(h);
  };
  const double v = (1 - tx) * (1 - ty) * node(fx, fy) + tx * (1 - ty) * node(fx + 1, fy) +
                   (1 - tx) * ty * node(fx, fy + 1) + tx * ty * node(fx + 1, fy + 1);
  return prop.shadowing_sigma * v;
}

//! Heavy-tailed inter-frame gaps of an inactive phone: a log-normal mixture
//! of short bursts and long silences.
struct ArrivalMixture
{
  double burst_weight = 0.22;
  double burst_median = 2.0;    // s
  double burst_sigma = 0.8;
  double silence_median = 90.0; // s
  double silence_sigma = 0.8;
  double screen_off_scale = 2.5;

  double sample(Rng& rng, bool screen_off) const
  {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const bool burst = u(rng) < burst_weight;
    std::normal_distribution<double> z(0.0, 1.0);
    const double median = burst ? burst_median : silence_median;
    const double sigma = burst ? burst_sigma : silence_sigma;
    const double gap = median * std::exp(sigma * z(rng));
    return screen_off ? gap * screen_off_scale : gap;
  }

  //! Closed-form CDF of one gap.
  double cdf(double gap, bool screen_off = false) const
  {
    const double s = screen_off ? screen_off_scale : 1.0;
    auto ln_cdf = [&](double median, double sigma) {
      return 0.5 * std::erfc(-(std::log(gap / (median * s)) / sigma) / std::sqrt(2.0));
    };
    if (!(gap > 0.0))
      return 0.0;
    return burst_weight * ln_cdf(burst_median, burst_sigma) +
           (1.0 - burst_weight) * ln_cdf(silence_median, silence_sigma);
  }
};

struct DeviceProfile
{
  std::string model_name;
  std::string mac;
  double tx_offset_mean = 0.0;  // dB
  double tx_offset_sigma = 1.0; // dB, per frame
  double rssi_min = -100.0;     // dBm clamp
  double rssi_max = -18.0;
  ArrivalMixture inactive_arrival;
  double cts_response_prob = 1.0;         // P(an RTS gets any reply)
  double rts_reply_per_minute_scale = 1.0; // mean CTS frames per answered RTS
  double data_frame_rate = 40.0;           // frames/s while active

  void validate() const
  {
    if (!(rssi_min < rssi_max))
      throw Error(Errc::invalid_argument, model_name + ": rssi_min must be < rssi_max");
    if (!(cts_response_prob >= 0.0 && cts_response_prob <= 1.0))
      throw Error(Errc::invalid_argument, model_name + ": cts_response_prob must lie in [0, 1]");
    if (!(rts_reply_per_minute_scale >= 1.0))
      throw Error(Errc::invalid_argument, model_name + ": reply scale must be >= 1");
    if (tx_offset_sigma < 0.0 || data_frame_rate < 0.0)
      throw Error(Errc::invalid_argument, model_name + ": negative rate or sigma");
  }

  //! Expected CTS frames per minute for a 200 ms RTS schedule.
  double expected_cts_per_minute(double rts_interval = 0.2) const
  {
    return 60.0 / rts_interval * cts_response_prob * rts_reply_per_minute_scale;
  }
};

//! The four handsets used for data collection, calibrated to their observed
//! RSSI spreads near an AP and their CTS reply counts under 200 ms RTS.
inline std::vector<DeviceProfile> default_devices()
{
  std::vector<DeviceProfile> d(4);
  d[0].model_name = "samsung_s6";
  d[0].mac = "02:00:00:00:00:01";
  d[0].tx_offset_mean = 1.0;
  d[0].tx_offset_sigma = 3.0;
  d[0].rssi_max = -18.0;
  d[0].cts_response_prob = 0.95;
  d[0].rts_reply_per_minute_scale = 4.0;
  d[0].data_frame_rate = 50.0;

  d[1].model_name = "nexus_5";
  d[1].mac = "02:00:00:00:00:02";
  d[1].tx_offset_mean = 1.0;
  d[1].tx_offset_sigma = 3.5;
  d[1].rssi_max = -16.0;
  d[1].cts_response_prob = 0.9;
  d[1].rts_reply_per_minute_scale = 3.0;
  d[1].data_frame_rate = 45.0;

  d[2].model_name = "iphone_x";
  d[2].mac = "02:00:00:00:00:03";
  d[2].tx_offset_mean = -3.0;
  d[2].tx_offset_sigma = 4.5;
  d[2].rssi_max = -18.0;
  d[2].cts_response_prob = 0.85;
  d[2].rts_reply_per_minute_scale = 1.0;
  d[2].data_frame_rate = 40.0;

  d[3].model_name = "htc_one_x";
  d[3].mac = "02:00:00:00:00:04";
  d[3].tx_offset_mean = 4.0;
  d[3].tx_offset_sigma = 2.0;
  d[3].rssi_max = -18.0;
  d[3].cts_response_prob = 0.33;
  d[3].rts_reply_per_minute_scale = 1.0;
  d[3].data_frame_rate = 35.0;
  return d;
}

inline const DeviceProfile& find_device(const std::vector<DeviceProfile>& devices, const std::string& name)
{
  for (const auto& d : devices)
    if (d.model_name == name)
      return d;
  throw Error(Errc::invalid_argument, "unknown device model '" + name + "'");
}

//! RSSI of one frame: log-distance path loss, frozen shadowing, device offset
//! and fast fading, clamped to the device's reporting range.
inline double rssi_at(const PropagationModel& prop, const DeviceProfile& dev, const AccessPoint& ap,
                      const Location& phone, Rng& rng)
{
  const double d = std::max(distance(ap.location, phone), 0.1);
  double v = prop.pl0 - 10.0 * prop.pathloss_exponent * std::log10(d) + shadow_field(prop, ap.id, phone) +
             dev.tx_offset_mean;
  std::normal_distribution<double> z(0.0, 1.0);
  if (dev.tx_offset_sigma > 0.0)
    v += dev.tx_offset_sigma * z(rng);
  if (prop.fast_fading_sigma > 0.0)
    v += prop.fast_fading_sigma * z(rng);
  return std::clamp(v, dev.rssi_min, dev.rssi_max);
}

//! Frozen reflector for an AP, inside the environment bounds.
inline std::vector<Location> reflectors_for(const PropagationModel& prop, const Environment& env, ApId ap)
{
  std::vector<Location> out;
  for (std::size_t r = 0; r < prop.csi_reflectors; ++r) {
    std::uint64_t h = detail::hash_combine(prop.seed, 0x2ef1ec7);
    h = detail::hash_combine(detail::hash_combine(h, ap), r);
    out.push_back({detail::hashed_uniform(h) * env.width, detail::hashed_uniform(detail::hash_combine(h, 1)) * env.height});
  }
  return out;
}

//! Per-session smooth amplitude distortion across subcarriers (antenna
//! orientation). Identity when the gain is 0.
struct OrientationDistortion
{
  double depth = 0.0;
  double cycles = 1.0;
  double phase = 0.0;

  double gain(std::size_t k) const
  {
    return 1.0 + depth * std::cos(2.0 * std::numbers::pi * cycles * static_cast<double>(k) /
                                    static_cast<double>(kSubcarriers) + phase);
  }

  static OrientationDistortion draw(const PropagationModel& prop, Rng& rng)
  {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    OrientationDistortion o;
    o.depth = prop.csi_orientation_gain * u(rng);
    o.cycles = 0.5 + 1.5 * u(rng);
    o.phase = 2.0 * std::numbers::pi * u(rng);
    return o;
  }
};

//! Noise-free multipath channel response at each subcarrier: the direct ray
//! plus one ray per reflector, each reflection weaker than the last.
inline std::array<std::complex<double>, kSubcarriers> channel_response(const PropagationModel& prop,
                                                                        const AccessPoint& ap,
                                                                        const std::vector<Location>& reflectors,
                                                                        const Location& phone)
{
  const double d1 = std::max(distance(ap.location, phone), 0.1);
  std::vector<std::pair<double, double>> rays{{d1, 1.0}};
  double gain = prop.reflection_gain;
  for (const auto& r : reflectors) {
    if (gain > 0.0)
      rays.emplace_back(std::max(distance(ap.location, r) + distance(r, phone), d1), gain);
    gain *= 0.8;
  }
  std::array<std::complex<double>, kSubcarriers> h{};
  const double centre = static_cast<double>(kSubcarriers - 1) / 2.0;
  for (std::size_t k = 0; k < kSubcarriers; ++k) {
    const double df = (static_cast<double>(k) - centre) * prop.subcarrier_spacing_hz;
    for (const auto& [d, g] : rays) {
      // carrier term on the configured spatial wavelength
      const double phase =
        -2.0 * std::numbers::pi * (d / prop.csi_spatial_wavelength + prop.csi_delay_scale * df * d / kSpeedOfLight);
      h[k] += std::polar(g / d, phase);
    }
  }
  return h;
}

//! One CSI scan. Relative noise grows with distance so that images near an AP
//! are stable and far ones fluctuate.
inline CsiScan csi_at(const PropagationModel& prop, const Environment& env, const AccessPoint& ap,
                      const Location& phone, Rng& rng, const OrientationDistortion& orientation = {})
{
  const auto h = channel_response(prop, ap, reflectors_for(prop, env, ap.id), phone);
  const double d = distance(ap.location, phone);
  const double rel = prop.csi_noise_near + prop.csi_noise_per_m * std::max(0.0, d - 1.0);
  double mean_mag = 0.0;
  for (const auto& v : h)
    mean_mag += std::abs(v);
  mean_mag /= static_cast<double>(kSubcarriers);

  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double common = 0.0;
  double slope = 0.0;
  if (prop.csi_random_phase) {
    common = std::numbers::pi * u(rng);
    slope = 0.1 * u(rng);
  }
  CsiScan scan;
  scan.ap = ap.id;
  for (std::size_t k = 0; k < kSubcarriers; ++k) {
    std::complex<double> v = h[k] * orientation.gain(k);
    if (rel > 0.0)
      v += std::complex<double>(z(rng), z(rng)) * (rel * mean_mag / std::sqrt(2.0));
    scan.amplitudes[k] = std::abs(v);
    scan.phases[k] = wrap_phase(std::arg(v) + common + slope * static_cast<double>(k));
  }
  return scan;
}

enum class FrameKind
{
  probe_request,
  data,
  cts,
  ack
};

inline const char* to_string(FrameKind k)
{
  switch (k) {
    case FrameKind::probe_request: return "probe_request";
    case FrameKind::data: return "data";
    case FrameKind::cts: return "cts";
    case FrameKind::ack: return "ack";
  }
  return "?";
}

inline FrameKind frame_kind_from(const std::string& s)
{
  if (s == "probe_request")
    return FrameKind::probe_request;
  if (s == "data")
    return FrameKind::data;
  if (s == "cts")
    return FrameKind::cts;
  if (s == "ack")
    return FrameKind::ack;
  throw Error(Errc::parse_error, "unknown frame kind '" + s + "'");
}

struct ApObservation
{
  double rssi = 0.0;
  std::optional<CsiScan> csi;
};

struct FrameEvent
{
  double t = 0.0;
  FrameKind kind = FrameKind::probe_request;
  std::string mac;
  std::map<ApId, ApObservation> ap_observations;
};

enum class PhoneState
{
  inactive_screen_on,
  inactive_screen_off,
  active
};

inline const char* to_string(PhoneState s)
{
  switch (s) {
    case PhoneState::inactive_screen_on: return "inactive";
    case PhoneState::inactive_screen_off: return "inactive_screen_off";
    case PhoneState::active: return "active";
  }
  return "?";
}

inline PhoneState phone_state_from(const std::string& s)
{
  if (s == "inactive" || s == "inactive_screen_on")
    return PhoneState::inactive_screen_on;
  if (s == "inactive_screen_off")
    return PhoneState::inactive_screen_off;
  if (s == "active")
    return PhoneState::active;
  throw Error(Errc::parse_error, "unknown phone state '" + s + "'");
}

inline constexpr double kCtsTurnaround = 60e-6; // SIFS + CTS airtime
inline constexpr double kCtsSpacing = 400e-6;   // between CTS frames of one burst

//! Frame timing of one phone over [0, duration). Events carry kind, time and
//! MAC only; run_trajectory() attaches the per-AP observations.
inline std::vector<FrameEvent> frame_stream(const DeviceProfile& dev, PhoneState state,
                                            std::optional<double> rts_interval, double duration, Rng& rng,
                                            bool background = true)
{
  if (!(duration > 0.0))
    throw Error(Errc::invalid_argument, "frame_stream duration must be > 0");
  std::vector<FrameEvent> out;
  auto emit = [&](double t, FrameKind kind) {
    if (t >= 0.0 && t < duration)
      out.push_back({t, kind, dev.mac, {}});
  };
  std::uniform_real_distribution<double> u(0.0, 1.0);

  if (background) {
    // Renewal process started at a random phase of its first gap.
    const bool screen_off = state == PhoneState::inactive_screen_off;
    double t = u(rng) * dev.inactive_arrival.sample(rng, screen_off);
    while (t < duration) {
      emit(t, FrameKind::probe_request);
      t += dev.inactive_arrival.sample(rng, screen_off);
    }
  }

  if (rts_interval && state != PhoneState::active) {
    if (!(*rts_interval > 0.0))
      throw Error(Errc::invalid_argument, "RTS interval must be > 0");
    std::poisson_distribution<int> extra(dev.rts_reply_per_minute_scale - 1.0);
    const bool has_extra = dev.rts_reply_per_minute_scale > 1.0;
    for (double tick = 0.0; tick < duration; tick += *rts_interval) {
      if (u(rng) >= dev.cts_response_prob)
        continue;
      const int n = 1 + (has_extra ? extra(rng) : 0);
      for (int j = 0; j < n; ++j)
        emit(tick + kCtsTurnaround + j * kCtsSpacing, FrameKind::cts);
    }
  }

  if (state == PhoneState::active && dev.data_frame_rate > 0.0) {
    std::exponential_distribution<double> data_gap(dev.data_frame_rate);
    std::exponential_distribution<double> ack_gap(dev.data_frame_rate / 2.0);
    for (double t = data_gap(rng); t < duration; t += data_gap(rng))
      emit(t, FrameKind::data);
    for (double t = ack_gap(rng); t < duration; t += ack_gap(rng))
      emit(t, FrameKind::ack);
  }

  std::stable_sort(out.begin(), out.end(), [](const FrameEvent& a, const FrameEvent& b) { return a.t < b.t; });
  return out;
}

//! Gaps between consecutive events.
inline std::vector<double> inter_frame_gaps(const std::vector<FrameEvent>& events)
{
  std::vector<double> gaps;
  for (std::size_t i = 1; i < events.size(); ++i)
    gaps.push_back(events[i].t - events[i - 1].t);
  return gaps;
}

struct SimEvent
{
  FrameEvent frame;
  Location truth;
};

struct SimStream
{
  std::string mac;
  std::vector<SimEvent> events;
};

struct RunOptions
{
  double rts_interval = 0.2; // per rts-capable AP
  bool background = true;
};

//! Simulates one phone walking `traj`. An initial probe request at the start
//! reveals the MAC; RTS ticks from every rts-capable AP are interleaved while
//! the phone is inactive. Frames that no AP hears are dropped.
inline SimStream run_trajectory(const Environment& env, const PropagationModel& prop, const DeviceProfile& dev,
                                const Trajectory& traj, PhoneState state, bool rts, std::uint64_t seed,
                                const RunOptions& options = {})
{
  prop.validate();
  dev.validate();
  traj.validate(env);
  Rng rng(seed);
  const auto orientation = OrientationDistortion::draw(prop, rng);

  std::size_t capable = 0;
  for (const auto& ap : env.aps)
    capable += ap.rts_capable ? 1 : 0;
  std::optional<double> interval;
  if (rts && capable > 0)
    interval = options.rts_interval / static_cast<double>(capable);

  const double t0 = traj.start_time();
  const double duration = std::max(traj.end_time() - t0, 1e-3);
  auto timing = frame_stream(dev, state, interval, duration, rng, options.background);
  timing.insert(timing.begin(), FrameEvent{0.0, FrameKind::probe_request, dev.mac, {}});

  SimStream stream;
  stream.mac = dev.mac;
  stream.events.reserve(timing.size());
  for (auto& ev : timing) {
    ev.t += t0;
    const Location pos = traj.position_at(ev.t);
    for (const auto& ap : env.aps) {
      const double v = rssi_at(prop, dev, ap, pos, rng);
      if (v < prop.sensitivity)
        continue;
      ApObservation obs{v, std::nullopt};
      if (ev.kind == FrameKind::data) {
        auto scan = csi_at(prop, env, ap, pos, rng, orientation);
        scan.timestamp = ev.t;
        obs.csi = scan;
      }
      ev.ap_observations.emplace(ap.id, std::move(obs));
    }
    if (ev.ap_observations.empty())
      continue;
    stream.events.push_back({std::move(ev), pos});
  }
  return stream;
}

//! Random-waypoint route: legs to uniformly drawn targets at speeds drawn
//! from the trajectory's range, until `duration` seconds elapse.
inline Trajectory random_route(const Environment& env, double speed_min, double speed_max, double duration,
                               Rng& rng, double margin = 0.5)
{
  std::uniform_real_distribution<double> ux(margin, env.width - margin);
  std::uniform_real_distribution<double> uy(margin, env.height - margin);
  std::uniform_real_distribution<double> us(speed_min, speed_max);
  Trajectory traj;
  traj.speed_min = speed_min;
  traj.speed_max = speed_max;
  double t = 0.0;
  Location cur{ux(rng), uy(rng)};
  traj.waypoints.push_back({t, cur});
  while (t < duration) {
    const Location next{ux(rng), uy(rng)};
    const double d = distance(cur, next);
    if (d < 1e-6)
      continue;
    const double speed = us(rng);
    t += d / speed;
    traj.waypoints.push_back({t, next});
    cur = next;
  }
  return traj;
}

//! Back-and-forth sweep over `rows` horizontal lanes at constant speed.
inline Trajectory lawnmower_route(const Environment& env, std::size_t rows, double speed, double margin = 0.5)
{
  Trajectory traj;
  traj.speed_min = speed;
  traj.speed_max = speed;
  double t = 0.0;
  const std::size_t n = std::max<std::size_t>(rows, 1);
  const double step = n > 1 ? (env.height - 2 * margin) / static_cast<double>(n - 1) : 0.0;
  Location prev{};
  for (std::size_t r = 0; r < n; ++r) {
    const double y = n > 1 ? margin + step * static_cast<double>(r) : env.height / 2;
    const bool forward = r % 2 == 0;
    const Location a{forward ? margin : env.width - margin, y};
    const Location b{forward ? env.width - margin : margin, y};
    for (const auto& p : {a, b}) {
      if (!traj.waypoints.empty()) {
        const double d = distance(prev, p);
        if (d < 1e-9)
          continue;
        t += d / speed;
      }
      traj.waypoints.push_back({t, p});
      prev = p;
    }
  }
  return traj;
}

//! Stationary trajectory: the phone parked at `where` for `duration` seconds.
inline Trajectory stationary(const Location& where, double duration)
{
  Trajectory traj;
  traj.speed_min = 0.0;
  traj.speed_max = 1.0;
  traj.waypoints = {{0.0, where}, {duration, where}};
  return traj;
}

//! Delimiter-separated event dump: `t,kind,mac,ap_id,rssi,csi_ref` rows, with
//! CSI written to a sidecar as `csi_ref,subcarrier,amplitude,phase_radians`.
inline void write_event_dump(std::ostream& events, std::ostream& csi_sidecar, const SimStream& stream)
{
  char buf[64];
  std::size_t ref = 0;
  events << "t,kind,mac,ap_id,rssi,csi_ref\n";
  csi_sidecar << "csi_ref,subcarrier,amplitude,phase_radians\n";
  for (const auto& ev : stream.events) {
    for (const auto& [ap, obs] : ev.frame.ap_observations) {
      std::snprintf(buf, sizeof buf, "%.9g", ev.frame.t);
      events << buf << "," << to_string(ev.frame.kind) << "," << ev.frame.mac << "," << ap << ",";
      std::snprintf(buf, sizeof buf, "%.9g", obs.rssi);
      events << buf;
      if (obs.csi) {
        events << "," << ref;
        for (std::size_t k = 0; k < kSubcarriers; ++k) {
          std::snprintf(buf, sizeof buf, "%.9g,%.9g", obs.csi->amplitudes[k], obs.csi->phases[k]);
          csi_sidecar << ref << "," << k << "," << buf << "\n";
        }
        ++ref;
      } else {
        events << ",";
      }
      events << "\n";
    }
  }
}

} // namespace passloc::airsim
