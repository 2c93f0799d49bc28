#pragma once

// AP-side tracking of one or more phones: MAC discovery from probe requests,
// per-interval frame accounting, active/inactive classification, RTS
// scheduling and routing of each interval's fingerprint to a localizer.

#include "passloc/airsim.hpp"
#include "passloc/core.hpp"
#include "passloc/csi.hpp"
#include "passloc/lstm.hpp"
#include "passloc/ssp.hpp"

#include <cmath>
#include <deque>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

namespace passloc::protocol {

using airsim::FrameEvent;
using airsim::FrameKind;

enum class Classification
{
  unknown,
  inactive,
  active
};

inline const char* to_string(Classification c)
{
  switch (c) {
    case Classification::unknown: return "unknown";
    case Classification::inactive: return "inactive";
    case Classification::active: return "active";
  }
  return "?";
}

struct TrackState
{
  std::string mac;
  Classification classification = Classification::unknown;
  double last_frame_t = -INFINITY;
  std::size_t frames_in_window = 0;
  bool rts_enabled = true;
  std::optional<Location> prev_estimate;
  double delta_t = 1.0;

  // Interval bookkeeping: the open interval is [bucket*dt, (bucket+1)*dt).
  long long bucket = 0;
  bool bucket_open = false;
  double last_data_t = -INFINITY;
  std::deque<std::vector<double>> rnn_history;

  double classification_window() const { return 2.0 * delta_t; }
};

struct RtsSchedule
{
  double interval = 0.2; // s
  std::size_t burst = 1; // RTS frames per tick

  void validate() const
  {
    if (!(interval > 0.0) || burst < 1)
      throw Error(Errc::invalid_argument, "RTS schedule needs interval > 0 and burst >= 1");
  }
};

struct Trigger
{
  std::string mac;
  double t_end = 0.0;
  long long bucket = 0;
  std::size_t frames = 0;
  Classification classification = Classification::unknown; // as of t_end
};

inline long long bucket_of(double t, double delta_t) { return static_cast<long long>(std::floor(t / delta_t)); }

//! Active iff at least one data frame arrived in (now - 2 dt, now].
inline Classification classify(const TrackState& state, double now)
{
  const double since = now - state.last_data_t;
  return (since >= 0.0 && since < state.classification_window()) ? Classification::active
                                                                  : Classification::inactive;
}

//! Closes every interval ending at or before `t`. Returns the trigger for the
//! open interval if it held at least one frame.
inline std::optional<Trigger> close_until(TrackState& state, double t)
{
  if (!state.bucket_open) {
    // a silent track still ages out of active at interval boundaries
    if (state.classification != Classification::unknown)
      state.classification = classify(state, std::floor(t / state.delta_t) * state.delta_t);
    return std::nullopt;
  }
  const double end = static_cast<double>(state.bucket + 1) * state.delta_t;
  if (t < end)
    return std::nullopt;
  state.classification = classify(state, end);
  std::optional<Trigger> trig;
  if (state.frames_in_window >= 1)
    trig = Trigger{state.mac, end, state.bucket, state.frames_in_window, state.classification};
  state.frames_in_window = 0;
  state.bucket_open = false;
  return trig;
}

//! Advances one track by one frame (the caller has already matched the MAC).
inline std::optional<Trigger> on_frame(TrackState& state, const FrameEvent& event)
{
  if (event.mac != state.mac)
    throw Error(Errc::invalid_argument, "frame for " + event.mac + " routed to track " + state.mac);
  auto trig = close_until(state, event.t);
  const long long b = bucket_of(event.t, state.delta_t);
  if (!state.bucket_open) {
    state.bucket = b;
    state.bucket_open = true;
  }
  ++state.frames_in_window;
  state.last_frame_t = event.t;
  if (event.kind == FrameKind::data) {
    state.last_data_t = event.t;
    state.classification = Classification::active;
  }
  return trig;
}

struct RtsCommand
{
  double t = 0.0;
  ApId ap = 0;
  std::string mac;
};

//! RTS commands in [t_begin, t_end) for a track that is not active. Each
//! rts-capable AP ticks every `interval`, the APs staggered evenly inside the
//! interval; every tick sends `burst` frames.
inline std::vector<RtsCommand> rts_controller(const TrackState& state, const RtsSchedule& schedule,
                                              const std::vector<AccessPoint>& aps, double t_begin, double t_end)
{
  schedule.validate();
  std::vector<RtsCommand> out;
  if (state.classification == Classification::active || !state.rts_enabled || !(t_end > t_begin))
    return out;
  std::vector<const AccessPoint*> capable;
  for (const auto& ap : aps)
    if (ap.rts_capable)
      capable.push_back(&ap);
  if (capable.empty())
    return out;
  const double stagger = schedule.interval / static_cast<double>(capable.size());
  const auto first = static_cast<long long>(std::floor(t_begin / schedule.interval)) - 1;
  for (long long k = first;; ++k) {
    const double base = static_cast<double>(k) * schedule.interval;
    if (base >= t_end)
      break;
    for (std::size_t j = 0; j < capable.size(); ++j) {
      const double t = base + stagger * static_cast<double>(j);
      if (t < t_begin || t >= t_end)
        continue;
      for (std::size_t b = 0; b < schedule.burst; ++b)
        out.push_back({t, capable[j]->id, state.mac});
    }
  }
  return out;
}

//! Everything collected for one track during one closed interval.
struct WindowObservation
{
  double t_end = 0.0;
  std::size_t frames = 0;
  Classification classification = Classification::unknown;
  FingerprintVector rssi;                      // mean RSSI per AP, env AP order
  std::map<ApId, std::vector<CsiScan>> csi;   // time order
};

struct LogEntry
{
  double t = 0.0;
  std::string mac;
  std::string action;
  std::string detail;
};

inline void write_log(std::ostream& out, const std::vector<LogEntry>& log)
{
  out << "t,mac,action,detail\n";
  for (const auto& e : log)
    out << detail::fmt_g(e.t, 9) << "," << e.mac << "," << e.action << "," << e.detail << "\n";
}

//! Multi-track front end. Frames from unknown MACs create a track only when
//! they are probe requests; frames failing the MAC filter are dropped.
class Tracker
{
public:
  Tracker(const Environment& env, double delta_t, std::optional<std::set<std::string>> mac_filter = std::nullopt)
    : env_(&env)
    , delta_t_(delta_t)
    , filter_(std::move(mac_filter))
  {
    if (!(delta_t > 0.0))
      throw Error(Errc::invalid_argument, "delta_t must be > 0");
  }

  struct Closed
  {
    Trigger trigger;
    WindowObservation window;
  };

  std::vector<Closed> on_frame(const FrameEvent& ev)
  {
    std::vector<Closed> out;
    if (filter_ && filter_->count(ev.mac) == 0)
      return out;
    auto it = tracks_.find(ev.mac);
    if (it == tracks_.end()) {
      if (ev.kind != FrameKind::probe_request)
        return out;
      Entry e;
      e.state.mac = ev.mac;
      e.state.delta_t = delta_t_;
      it = tracks_.emplace(ev.mac, std::move(e)).first;
      log_.push_back({ev.t, ev.mac, "track", "created"});
    }
    Entry& e = it->second;
    if (auto trig = protocol::on_frame(e.state, ev))
      out.push_back(finish(e, *trig));
    accumulate(e, ev);
    return out;
  }

  //! Closes intervals ending at or before `t` on every track.
  std::vector<Closed> flush(double t)
  {
    std::vector<Closed> out;
    for (auto& [mac, e] : tracks_)
      if (auto trig = close_until(e.state, t))
        out.push_back(finish(e, *trig));
    return out;
  }

  TrackState* track(const std::string& mac)
  {
    auto it = tracks_.find(mac);
    return it == tracks_.end() ? nullptr : &it->second.state;
  }

  std::vector<LogEntry>& log() { return log_; }

private:
  struct Entry
  {
    TrackState state;
    std::vector<double> rssi_sum;
    std::vector<std::size_t> rssi_count;
    std::map<ApId, std::vector<CsiScan>> csi;
  };

  void accumulate(Entry& e, const FrameEvent& ev)
  {
    const std::size_t p = env_->aps.size();
    if (e.rssi_sum.size() != p) {
      e.rssi_sum.assign(p, 0.0);
      e.rssi_count.assign(p, 0);
    }
    for (const auto& [ap, obs] : ev.ap_observations) {
      const auto idx = env_->ap_index(ap);
      if (!idx)
        continue;
      e.rssi_sum[*idx] += obs.rssi;
      ++e.rssi_count[*idx];
      if (obs.csi)
        e.csi[ap].push_back(*obs.csi);
    }
  }

  Closed finish(Entry& e, const Trigger& trig)
  {
    Closed c{trig, {}};
    c.window.t_end = trig.t_end;
    c.window.frames = trig.frames;
    c.window.classification = trig.classification;
    c.window.rssi.features.resize(env_->aps.size());
    for (std::size_t k = 0; k < e.rssi_sum.size(); ++k)
      if (e.rssi_count[k] > 0)
        c.window.rssi.features[k] = e.rssi_sum[k] / static_cast<double>(e.rssi_count[k]);
    c.window.csi = std::move(e.csi);
    e.csi.clear();
    std::fill(e.rssi_sum.begin(), e.rssi_sum.end(), 0.0);
    std::fill(e.rssi_count.begin(), e.rssi_count.end(), 0);
    log_.push_back({trig.t_end, trig.mac, "trigger",
                    std::to_string(trig.frames) + " frames " + to_string(trig.classification)});
    return c;
  }

  const Environment* env_;
  double delta_t_;
  std::optional<std::set<std::string>> filter_;
  std::map<std::string, Entry> tracks_;
  std::vector<LogEntry> log_;
};

enum class Route
{
  ssp,
  lstm,
  two_step,
  two_step_fallback,
  no_fix
};

inline const char* to_string(Route r)
{
  switch (r) {
    case Route::ssp: return "ssp";
    case Route::lstm: return "lstm";
    case Route::two_step: return "two_step";
    case Route::two_step_fallback: return "two_step_fallback";
    case Route::no_fix: return "no_fix";
  }
  return "?";
}

//! The localizers a track can be routed to. Only references are held.
struct Localizers
{
  const FingerprintDatabase* db = nullptr;
  const ssp::LikelihoodModel* likelihood = nullptr;
  ssp::SspConfig ssp{};
  csi::RefineConfig refine{};
  const rnn::Lstm* lstm = nullptr; // used for inactive tracks when set
  bool use_two_step = true;        // for active tracks
};

struct DispatchOutcome
{
  std::optional<Location> estimate;
  Route route = Route::no_fix;
};

//! Inactive tracks go to SSP (or the LSTM when configured); active tracks go
//! through SSP top-K and CSI refinement, falling back to the SSP estimate when
//! CSI is insufficient. Updates prev_estimate on success.
inline DispatchOutcome dispatch(TrackState& state, const WindowObservation& window, const Localizers& loc)
{
  if (window.frames == 0 || window.rssi.observed_count() == 0)
    return {};
  const bool active = window.classification == Classification::active;

  DispatchOutcome out;
  if (!active && loc.lstm != nullptr) {
    const auto& cfg = loc.lstm->config();
    state.rnn_history.push_back(rnn::normalize_fingerprint(window.rssi));
    while (state.rnn_history.size() > cfg.memory_length)
      state.rnn_history.pop_front();
    rnn::Matrix input(cfg.memory_length, cfg.input_size);
    const std::size_t have = state.rnn_history.size();
    for (std::size_t t = 0; t < cfg.memory_length; ++t) {
      // Pad the front with the oldest fingerprint until T are available.
      const std::size_t src = t + have >= cfg.memory_length ? t + have - cfg.memory_length : 0;
      for (std::size_t j = 0; j < cfg.input_size; ++j)
        input(t, j) = state.rnn_history[src][j];
    }
    const auto pred = loc.lstm->forward(input);
    out.estimate = Location{pred(cfg.memory_length - 1, 0), pred(cfg.memory_length - 1, 1)};
    out.route = Route::lstm;
    state.prev_estimate = out.estimate;
    return out;
  }

  const auto post = ssp::posterior(*loc.likelihood, window.rssi, state.prev_estimate, loc.ssp.window);
  const Location ssp_estimate = ssp::estimate(post, *loc.db, loc.ssp.k);
  out.estimate = ssp_estimate;
  out.route = Route::ssp;

  if (active && loc.use_two_step) {
    out.route = Route::two_step_fallback;
    std::map<ApId, csi::ObservedCsi> observed;
    for (const auto& [ap, scans] : window.csi)
      if (scans.size() >= kScansPerImage)
        observed.emplace(ap, csi::observe(scans));
    if (!observed.empty()) {
      const auto candidates = csi::candidates_from(post, loc.ssp.k);
      if (auto refined = csi::refine(candidates, observed, window.rssi, *loc.db, loc.refine)) {
        out.estimate = refined->location;
        out.route = Route::two_step;
      }
    }
  }
  state.prev_estimate = out.estimate;
  return out;
}

} // namespace passloc::protocol
