#pragma once

// Experiment harness: simulated database collection, trajectory test runs
// through the protocol front end, error reports and comparison tables.

#include "passloc/airsim.hpp"
#include "passloc/core.hpp"
#include "passloc/lstm.hpp"
#include "passloc/protocol.hpp"
#include "passloc/scenario.hpp"
#include "passloc/ssp.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <ostream>
#include <string>
#include <vector>

namespace passloc::eval {

using airsim::PhoneState;

enum class Algorithm
{
  ssp,
  pmimo_lstm,
  two_step
};

inline const char* to_string(Algorithm a)
{
  switch (a) {
    case Algorithm::ssp: return "ssp";
    case Algorithm::pmimo_lstm: return "pmimo_lstm";
    case Algorithm::two_step: return "two_step";
  }
  return "?";
}

inline Algorithm algorithm_from(const std::string& s)
{
  if (s == "ssp")
    return Algorithm::ssp;
  if (s == "pmimo_lstm" || s == "lstm")
    return Algorithm::pmimo_lstm;
  if (s == "two_step")
    return Algorithm::two_step;
  throw Error(Errc::parse_error, "unknown algorithm '" + s + "'");
}

struct RunSpec
{
  std::string device_model;
  PhoneState phone_state = PhoneState::inactive_screen_on;
  Algorithm algorithm = Algorithm::ssp;
  bool rts = true;
  std::vector<std::uint64_t> seeds{1};
  double delta_t = 1.0;

  void validate() const
  {
    if (algorithm == Algorithm::two_step && phone_state != PhoneState::active)
      throw Error(Errc::invalid_argument, "two_step needs an active phone");
    if (!(delta_t > 0.0))
      throw Error(Errc::invalid_argument, "delta_t must be > 0");
    if (seeds.empty())
      throw Error(Errc::invalid_argument, "run needs at least one seed");
  }
};

struct CdfPoint
{
  double error = 0.0;
  double fraction = 0.0;
};

struct ErrorReport
{
  std::vector<double> errors; // per fix, metres
  double mean = 0.0;
  double std = 0.0; // sample standard deviation
  double max = 0.0;
  std::vector<CdfPoint> cdf;
  std::size_t windows = 0;
  std::size_t fixes = 0;
  double fix_rate = 0.0;
  bool flagged = false; // no fixes at all
  std::map<std::string, std::size_t> routes;

  //! Recomputes the summary fields from `errors`, `windows` and `fixes`.
  void summarize()
  {
    fixes = errors.size();
    flagged = errors.empty();
    fix_rate = windows > 0 ? static_cast<double>(fixes) / static_cast<double>(windows) : 0.0;
    cdf.clear();
    if (errors.empty()) {
      mean = std = max = 0.0;
      return;
    }
    const double n = static_cast<double>(errors.size());
    mean = std::accumulate(errors.begin(), errors.end(), 0.0) / n;
    double ss = 0.0;
    for (double e : errors)
      ss += (e - mean) * (e - mean);
    std = errors.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    std::vector<double> sorted = errors;
    std::sort(sorted.begin(), sorted.end());
    max = sorted.back();
    for (std::size_t i = 0; i < sorted.size(); ++i)
      if (i + 1 == sorted.size() || sorted[i + 1] != sorted[i])
        cdf.push_back({sorted[i], static_cast<double>(i + 1) / n});
  }

  //! Merge of several reports (per-seed runs): errors concatenated in the
  //! given order, windows summed.
  static ErrorReport merge(const std::vector<ErrorReport>& parts)
  {
    ErrorReport r;
    for (const auto& p : parts) {
      r.errors.insert(r.errors.end(), p.errors.begin(), p.errors.end());
      r.windows += p.windows;
      for (const auto& [k, v] : p.routes)
        r.routes[k] += v;
    }
    r.summarize();
    return r;
  }
};

namespace detail {

inline std::uint64_t mix(std::uint64_t a, std::uint64_t b) { return airsim::detail::hash_combine(a, b); }

} // namespace detail

//! Simulates the survey: at every RP each device dwells in the inactive+RTS
//! state for `collect.dwell` seconds per session, and one active session per
//! visit provides 20 CSI scans per AP (the device rotates across sessions).
inline FingerprintDatabase collect_training(const Scenario& scenario, std::uint64_t seed,
                                            const std::vector<std::string>& device_names = {})
{
  scenario.validate();
  std::vector<airsim::DeviceProfile> devices;
  if (device_names.empty())
    devices = scenario.devices;
  else
    for (const auto& name : device_names)
      devices.push_back(airsim::find_device(scenario.devices, name));

  airsim::RunOptions opts;
  opts.rts_interval = scenario.collect.rts_interval;
  std::vector<ObservationBatch> batches;
  for (const auto& rp : scenario.env.rps) {
    for (std::size_t session = 0; session < scenario.collect.sessions; ++session) {
      for (std::size_t di = 0; di < devices.size(); ++di) {
        const auto& dev = devices[di];
        const std::uint64_t s = detail::mix(detail::mix(detail::mix(seed, rp.id), session), di);
        const auto traj = airsim::stationary(rp.location, scenario.collect.dwell);
        const auto stream = airsim::run_trajectory(scenario.env, scenario.prop, dev, traj,
                                                   PhoneState::inactive_screen_on, true, s, opts);
        ObservationBatch batch;
        batch.rp_id = rp.id;
        batch.device = dev.model_name;
        for (const auto& ev : stream.events)
          for (const auto& [ap, obs] : ev.frame.ap_observations)
            batch.rssi[ap].push_back({ev.frame.t + static_cast<double>(session) * 1e5, obs.rssi});
        batches.push_back(std::move(batch));
      }

      // CSI capture for this visit.
      const auto& dev = devices[session % devices.size()];
      const double need = static_cast<double>(kScansPerImage) / std::max(dev.data_frame_rate, 1.0);
      const auto traj = airsim::stationary(rp.location, 4.0 * need + 1.0);
      const std::uint64_t s = detail::mix(detail::mix(seed ^ 0xc51ULL, rp.id), session);
      const auto stream = airsim::run_trajectory(scenario.env, scenario.prop, dev, traj, PhoneState::active,
                                                 false, s, opts);
      ObservationBatch batch;
      batch.rp_id = rp.id;
      batch.device = dev.model_name;
      for (const auto& ev : stream.events)
        for (const auto& [ap, obs] : ev.frame.ap_observations)
          if (obs.csi && batch.csi[ap].size() < kScansPerImage)
            batch.csi[ap].push_back(*obs.csi);
      for (auto it = batch.csi.begin(); it != batch.csi.end();) {
        if (it->second.size() < kScansPerImage)
          it = batch.csi.erase(it);
        else
          ++it;
      }
      batches.push_back(std::move(batch));
    }
  }
  return build_database(scenario.env, batches);
}

//! Test route for one seed, per the scenario's route setting.
inline Trajectory test_route(const Scenario& scenario, std::uint64_t seed)
{
  if (scenario.test.route == "fixed") {
    Trajectory t;
    t.waypoints = scenario.test.waypoints;
    t.speed_min = scenario.test.speed_min;
    t.speed_max = scenario.test.speed_max;
    return t;
  }
  if (scenario.test.route == "lawnmower")
    return airsim::lawnmower_route(scenario.env, scenario.test.lawnmower_rows,
                                   0.5 * (scenario.test.speed_min + scenario.test.speed_max));
  if (scenario.test.route != "random")
    throw Error(Errc::invalid_argument, "unknown route kind '" + scenario.test.route + "'");
  airsim::Rng rng(detail::mix(seed, 0x70a7eULL));
  return airsim::random_route(scenario.env, scenario.test.speed_min, scenario.test.speed_max,
                              scenario.test.duration, rng);
}

//! Shared, immutable inputs of a test run.
struct TestContext
{
  const Scenario* scenario = nullptr;
  const FingerprintDatabase* db = nullptr;
  const ssp::LikelihoodModel* likelihood = nullptr;
  const rnn::Lstm* lstm = nullptr;
};

//! One seed: simulate the phone along its route, feed the frames through the
//! tracker and localize at every closed interval. The error of a fix is the
//! distance to the ground truth at the interval end.
inline ErrorReport run_seed(const TestContext& ctx, const RunSpec& spec, std::uint64_t seed,
                            std::vector<protocol::LogEntry>* log = nullptr)
{
  spec.validate();
  const Scenario& sc = *ctx.scenario;
  if (spec.algorithm == Algorithm::pmimo_lstm && ctx.lstm == nullptr)
    throw Error(Errc::invalid_argument, "pmimo_lstm run needs a trained model");
  const auto& dev = airsim::find_device(sc.devices, spec.device_model);
  const auto traj = test_route(sc, seed);

  airsim::RunOptions opts;
  opts.rts_interval = sc.rts_interval;
  const auto stream = airsim::run_trajectory(sc.env, sc.prop, dev, traj, spec.phone_state, spec.rts,
                                             detail::mix(seed, 0x5eedULL), opts);

  protocol::Localizers loc;
  loc.db = ctx.db;
  loc.likelihood = ctx.likelihood;
  loc.ssp = sc.ssp;
  loc.refine = sc.refine;
  loc.lstm = spec.algorithm == Algorithm::pmimo_lstm ? ctx.lstm : nullptr;
  loc.use_two_step = spec.algorithm == Algorithm::two_step;

  protocol::Tracker tracker(sc.env, spec.delta_t, std::set<std::string>{dev.mac});
  ErrorReport report;
  const double t0 = traj.start_time();
  const double t1 = traj.end_time();
  const auto first_bucket = protocol::bucket_of(t0, spec.delta_t);
  const auto last_bucket = protocol::bucket_of(t1, spec.delta_t); // last complete interval ends at or before t1
  report.windows = static_cast<std::size_t>(std::max<long long>(0, last_bucket - first_bucket));

  protocol::RtsSchedule schedule{sc.rts_interval, 1};
  double rts_cursor = t0;
  auto handle = [&](const std::vector<protocol::Tracker::Closed>& closed) {
    for (const auto& c : closed) {
      if (c.window.t_end > t1)
        continue;
      auto* state = tracker.track(c.trigger.mac);
      const auto outcome = protocol::dispatch(*state, c.window, loc);
      report.routes[protocol::to_string(outcome.route)]++;
      if (outcome.estimate)
        report.errors.push_back(distance(*outcome.estimate, traj.position_at(c.window.t_end)));
      if (log) {
        log->push_back({c.window.t_end, c.trigger.mac, "fix",
                        std::string(protocol::to_string(outcome.route)) +
                          (outcome.estimate ? " " + passloc::detail::fmt_g(outcome.estimate->x, 6) + " " +
                                                passloc::detail::fmt_g(outcome.estimate->y, 6)
                                            : "")});
      }
    }
  };
  for (const auto& ev : stream.events) {
    if (log && spec.rts) {
      if (auto* state = tracker.track(dev.mac)) {
        for (const auto& cmd : protocol::rts_controller(*state, schedule, sc.env.aps, rts_cursor, ev.frame.t))
          log->push_back({cmd.t, cmd.mac, "rts", "ap " + std::to_string(cmd.ap)});
        rts_cursor = std::max(rts_cursor, ev.frame.t);
      }
    }
    handle(tracker.on_frame(ev.frame));
  }
  handle(tracker.flush(t1));
  if (log) {
    const auto& tl = tracker.log();
    log->insert(log->end(), tl.begin(), tl.end());
    std::stable_sort(log->begin(), log->end(), [](const auto& a, const auto& b) { return a.t < b.t; });
  }
  report.summarize();
  return report;
}

struct RunResult
{
  ErrorReport combined;
  std::vector<ErrorReport> per_seed;
};

inline RunResult run_test(const TestContext& ctx, const RunSpec& spec)
{
  RunResult out;
  for (auto seed : spec.seeds)
    out.per_seed.push_back(run_seed(ctx, spec, seed));
  out.combined = ErrorReport::merge(out.per_seed);
  return out;
}

//! Training windows for the LSTM: simulated inactive+RTS walks cut into
//! T-step sequences of normalized per-interval fingerprints, target = truth
//! at each interval end. Intervals without frames repeat the previous input.
inline rnn::TrainingSet lstm_training_set(const Scenario& sc, std::size_t trajectories, std::size_t memory_length,
                                          std::uint64_t seed)
{
  rnn::TrainingSet set;
  airsim::RunOptions opts;
  opts.rts_interval = sc.rts_interval;
  const std::size_t P = sc.env.aps.size();
  for (std::size_t n = 0; n < trajectories; ++n) {
    const auto& dev = sc.devices[n % sc.devices.size()];
    airsim::Rng rng(detail::mix(seed, n));
    const double duration = static_cast<double>(memory_length + 1) * sc.delta_t;
    auto traj = airsim::random_route(sc.env, sc.test.speed_min, sc.test.speed_max, duration, rng);
    const auto stream = airsim::run_trajectory(sc.env, sc.prop, dev, traj, PhoneState::inactive_screen_on, true,
                                               detail::mix(seed, n + 0x10000ULL), opts);
    protocol::Tracker tracker(sc.env, sc.delta_t);
    std::vector<protocol::WindowObservation> windows;
    for (const auto& ev : stream.events)
      for (auto& c : tracker.on_frame(ev.frame))
        windows.push_back(std::move(c.window));
    for (auto& c : tracker.flush(traj.end_time()))
      windows.push_back(std::move(c.window));

    rnn::Sequence seq{rnn::Matrix(memory_length, P), rnn::Matrix(memory_length, 2)};
    std::vector<double> last(P, 0.0);
    std::size_t wi = 0;
    for (std::size_t t = 0; t < memory_length; ++t) {
      const double t_end = static_cast<double>(t + 1) * sc.delta_t;
      while (wi < windows.size() && windows[wi].t_end < t_end - 1e-9)
        ++wi;
      if (wi < windows.size() && std::abs(windows[wi].t_end - t_end) < 1e-9)
        last = rnn::normalize_fingerprint(windows[wi].rssi);
      for (std::size_t j = 0; j < P; ++j)
        seq.input(t, j) = last[j];
      const auto truth = traj.position_at(t_end);
      seq.target(t, 0) = truth.x;
      seq.target(t, 1) = truth.y;
    }
    set.sequences.push_back(std::move(seq));
  }
  return set;
}

struct ComparisonRow
{
  std::string label;
  double mean = 0.0;
  double std = 0.0;
  std::size_t fixes = 0;
  double fix_rate = 0.0;
};

struct Comparison
{
  std::vector<ComparisonRow> rows;
  std::map<std::string, std::vector<CdfPoint>> cdfs;
};

inline Comparison compare(const std::map<std::string, ErrorReport>& reports)
{
  if (reports.size() < 2)
    throw Error(Errc::invalid_argument, "compare needs at least two reports");
  Comparison out;
  for (const auto& [label, r] : reports) {
    out.rows.push_back({label, r.mean, r.std, r.fixes, r.fix_rate});
    out.cdfs[label] = r.cdf;
  }
  return out;
}

//! Mean +/- std table, one row per method and one column per label suffix,
//! i.e. labels of the form "<method>/<device>".
inline void write_table(std::ostream& out, const Comparison& cmp)
{
  std::vector<std::string> methods;
  std::vector<std::string> columns;
  std::map<std::pair<std::string, std::string>, const ComparisonRow*> cell;
  for (const auto& row : cmp.rows) {
    const auto slash = row.label.find('/');
    const std::string method = slash == std::string::npos ? row.label : row.label.substr(0, slash);
    const std::string column = slash == std::string::npos ? "all" : row.label.substr(slash + 1);
    if (std::find(methods.begin(), methods.end(), method) == methods.end())
      methods.push_back(method);
    if (std::find(columns.begin(), columns.end(), column) == columns.end())
      columns.push_back(column);
    cell[{method, column}] = &row;
  }
  out << "method";
  for (const auto& c : columns)
    out << "," << c;
  out << "\n";
  for (const auto& m : methods) {
    out << m;
    for (const auto& c : columns) {
      out << ",";
      if (auto it = cell.find({m, c}); it != cell.end())
        out << passloc::detail::fmt_g(it->second->mean, 3) << " +/- " << passloc::detail::fmt_g(it->second->std, 3);
    }
    out << "\n";
  }
}

//! Long-format CDF data: label,error,fraction.
inline void write_cdf(std::ostream& out, const Comparison& cmp)
{
  out << "label,error,fraction\n";
  for (const auto& [label, pts] : cmp.cdfs)
    for (const auto& p : pts)
      out << label << "," << passloc::detail::fmt_g(p.error, 9) << "," << passloc::detail::fmt_g(p.fraction, 9) << "\n";
}

//! Per-fix errors of a report (one per line, 17 digits) plus a summary
//! header; readable back with read_report().
inline void write_report(std::ostream& out, const ErrorReport& r)
{
  out << "# windows=" << r.windows << "\n";
  out << "error\n";
  for (double e : r.errors)
    out << passloc::detail::fmt_g(e, 17) << "\n";
}

inline ErrorReport read_report(std::istream& in)
{
  ErrorReport r;
  std::string line;
  while (std::getline(in, line)) {
    const auto t = passloc::detail::trim(line);
    if (t.empty() || t == "error")
      continue;
    if (t.rfind("# windows=", 0) == 0) {
      r.windows = static_cast<std::size_t>(passloc::detail::parse_int(t.substr(10)));
      continue;
    }
    if (t.front() == '#')
      continue;
    r.errors.push_back(passloc::detail::parse_double(t));
  }
  r.summarize();
  return r;
}

} // namespace passloc::eval
