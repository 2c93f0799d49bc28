#pragma once

#include "passloc/csi_features.hpp"
#include "passloc/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace passloc {

using RpId = std::uint32_t;

struct Location
{
  double x = 0.0;
  double y = 0.0;

  bool operator==(const Location&) const = default;
};

inline double distance(const Location& a, const Location& b)
{
  return std::hypot(a.x - b.x, a.y - b.y);
}

inline double squared_distance(const Location& a, const Location& b)
{
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return dx * dx + dy * dy;
}

struct AccessPoint
{
  ApId id = 0;
  Location location;
  bool rts_capable = false;

  bool operator==(const AccessPoint&) const = default;
};

struct ReferencePoint
{
  RpId id = 0;
  Location location;

  bool operator==(const ReferencePoint&) const = default;
};

//! Floor geometry: bounding box, access points and reference points.
struct Environment
{
  double width = 0.0;
  double height = 0.0;
  double grid_spacing = 1.0;
  std::vector<AccessPoint> aps;
  std::vector<ReferencePoint> rps;

  std::size_t ap_count() const { return aps.size(); }
  std::size_t rp_count() const { return rps.size(); }

  bool contains(const Location& loc) const
  {
    return std::isfinite(loc.x) && std::isfinite(loc.y) && loc.x >= 0.0 && loc.y >= 0.0 &&
           loc.x <= width && loc.y <= height;
  }

  //! Position of an AP in `aps`, or nullopt.
  std::optional<std::size_t> ap_index(ApId id) const
  {
    for (std::size_t i = 0; i < aps.size(); ++i)
      if (aps[i].id == id)
        return i;
    return std::nullopt;
  }

  const ReferencePoint* find_rp(RpId id) const
  {
    if (id < rps.size() && rps[id].id == id)
      return &rps[id];
    for (const auto& rp : rps)
      if (rp.id == id)
        return &rp;
    return nullptr;
  }

  void validate() const
  {
    if (!(width > 0.0) || !(height > 0.0))
      throw Error(Errc::invalid_argument, "environment bounds must be positive");
    if (aps.empty())
      throw Error(Errc::invalid_argument, "environment needs at least one AP");
    if (rps.empty())
      throw Error(Errc::invalid_argument, "environment needs at least one RP");
    std::set<std::pair<double, double>> seen;
    for (const auto& rp : rps) {
      if (!contains(rp.location))
        throw Error(Errc::out_of_bounds, "RP " + std::to_string(rp.id) + " outside bounds");
      if (!seen.emplace(rp.location.x, rp.location.y).second)
        throw Error(Errc::invalid_argument, "duplicate RP location for RP " + std::to_string(rp.id));
    }
    std::set<ApId> ap_ids;
    for (const auto& ap : aps)
      if (!ap_ids.insert(ap.id).second)
        throw Error(Errc::invalid_argument, "duplicate AP id " + std::to_string(ap.id));
  }
};

//! RPs at cell centres of a regular grid, ids dense in row-major order.
inline std::vector<ReferencePoint> grid_rps(double width, double height, double spacing)
{
  if (!(spacing > 0.0))
    throw Error(Errc::invalid_argument, "grid spacing must be positive");
  const auto cols = static_cast<std::size_t>(std::floor(width / spacing + 1e-9));
  const auto rows = static_cast<std::size_t>(std::floor(height / spacing + 1e-9));
  std::vector<ReferencePoint> rps;
  rps.reserve(cols * rows);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c)
      rps.push_back({static_cast<RpId>(rps.size()),
                     {(static_cast<double>(c) + 0.5) * spacing,
                      (static_cast<double>(r) + 0.5) * spacing}});
  return rps;
}

enum class FeatureKind
{
  rssi_dbm,
  csi_derived
};

//! One observation per feature; nullopt marks an AP that heard nothing.
struct FingerprintVector
{
  std::vector<std::optional<double>> features;
  FeatureKind kind = FeatureKind::rssi_dbm;

  std::size_t size() const { return features.size(); }

  std::size_t observed_count() const
  {
    return static_cast<std::size_t>(
      std::count_if(features.begin(), features.end(), [](const auto& f) { return f.has_value(); }));
  }

  bool operator==(const FingerprintVector&) const = default;
};

struct RssiSample
{
  double timestamp = 0.0;
  double rssi = 0.0;

  bool operator==(const RssiSample&) const = default;
};

using DeviceSamples = std::map<std::string, std::vector<RssiSample>>;

struct FingerprintRecord
{
  RpId rp_id = 0;
  Location location;
  std::map<ApId, DeviceSamples> rssi_samples;
  // Raw scans are the persisted form; images and phase vectors derive from them.
  std::map<ApId, std::vector<CsiScan>> csi_scans;
  std::map<ApId, std::vector<CsiImage>> csi_images;
  std::map<ApId, std::vector<PhaseDiffVector>> csi_phase;

  std::size_t sample_count(ApId ap) const
  {
    auto it = rssi_samples.find(ap);
    if (it == rssi_samples.end())
      return 0;
    std::size_t n = 0;
    for (const auto& [device, samples] : it->second)
      n += samples.size();
    return n;
  }

  //! Recomputes images (consecutive groups of 20 scans) and per-scan phase
  //! difference vectors from `csi_scans`.
  void derive_csi_features()
  {
    csi_images.clear();
    csi_phase.clear();
    for (const auto& [ap, scans] : csi_scans) {
      auto& images = csi_images[ap];
      for (std::size_t start = 0; start + kScansPerImage <= scans.size(); start += kScansPerImage)
        images.push_back(build_image(std::span(scans).subspan(start, kScansPerImage)));
      if (images.empty())
        csi_images.erase(ap);
      auto& phase = csi_phase[ap];
      for (const auto& s : scans)
        phase.push_back(phase_difference(s));
    }
  }

  bool operator==(const FingerprintRecord&) const = default;
};

//! A labeled collection run: everything one device recorded while parked at
//! one RP during one session.
struct ObservationBatch
{
  RpId rp_id = 0;
  std::string device;
  std::map<ApId, std::vector<RssiSample>> rssi;
  std::map<ApId, std::vector<CsiScan>> csi;
};

//! Immutable after construction; safe to share across threads for reading.
class FingerprintDatabase
{
public:
  FingerprintDatabase() = default;

  FingerprintDatabase(Environment env, std::vector<FingerprintRecord> records)
    : env_(std::move(env))
    , records_(std::move(records))
  {
    std::sort(records_.begin(), records_.end(),
              [](const auto& a, const auto& b) { return a.rp_id < b.rp_id; });
  }

  const Environment& environment() const { return env_; }
  const std::vector<FingerprintRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }

  const FingerprintRecord* find(RpId id) const
  {
    auto it = std::lower_bound(records_.begin(), records_.end(), id,
                               [](const FingerprintRecord& r, RpId v) { return r.rp_id < v; });
    if (it == records_.end() || it->rp_id != id)
      return nullptr;
    return &*it;
  }

  const FingerprintRecord& at(RpId id) const
  {
    if (const auto* r = find(id))
      return *r;
    throw Error(Errc::unknown_rp, "rp " + std::to_string(id) + " not in database");
  }

  bool operator==(const FingerprintDatabase& other) const
  {
    return env_.width == other.env_.width && env_.height == other.env_.height &&
           env_.grid_spacing == other.env_.grid_spacing && env_.aps == other.env_.aps &&
           env_.rps == other.env_.rps && records_ == other.records_;
  }

private:
  Environment env_;
  std::vector<FingerprintRecord> records_;
};

//! Merges labeled batches into one record per RP. Sample sequences end up
//! sorted by timestamp; CSI scans keep their capture order but not their
//! timestamps (stored scans are keyed by index only).
inline FingerprintDatabase build_database(const Environment& env,
                                          const std::vector<ObservationBatch>& batches)
{
  if (batches.empty())
    throw Error(Errc::empty_database, "no observation batches");

  std::map<RpId, FingerprintRecord> merged;
  for (const auto& batch : batches) {
    const ReferencePoint* rp = env.find_rp(batch.rp_id);
    if (rp == nullptr)
      throw Error(Errc::unknown_rp, "batch labeled with unknown rp " + std::to_string(batch.rp_id));
    auto& rec = merged[batch.rp_id];
    rec.rp_id = rp->id;
    rec.location = rp->location;
    for (const auto& [ap, samples] : batch.rssi) {
      if (!env.ap_index(ap))
        throw Error(Errc::invalid_argument, "unknown AP " + std::to_string(ap));
      for (const auto& s : samples)
        if (!std::isfinite(s.rssi) || !std::isfinite(s.timestamp))
          throw Error(Errc::invalid_argument, "non-finite RSSI sample");
      if (samples.empty())
        continue;
      auto& dst = rec.rssi_samples[ap][batch.device];
      dst.insert(dst.end(), samples.begin(), samples.end());
    }
    for (const auto& [ap, scans] : batch.csi) {
      if (!env.ap_index(ap))
        throw Error(Errc::invalid_argument, "unknown AP " + std::to_string(ap));
      auto& dst = rec.csi_scans[ap];
      for (auto scan : scans) {
        scan.ap = ap;
        scan.timestamp = 0.0;
        dst.push_back(scan);
      }
    }
  }

  std::vector<FingerprintRecord> records;
  records.reserve(merged.size());
  for (auto& [id, rec] : merged) {
    for (auto& [ap, devices] : rec.rssi_samples)
      for (auto& [device, samples] : devices)
        std::stable_sort(samples.begin(), samples.end(),
                         [](const RssiSample& a, const RssiSample& b) { return a.timestamp < b.timestamp; });
    rec.derive_csi_features();
    records.push_back(std::move(rec));
  }
  return FingerprintDatabase(env, std::move(records));
}

//! RP closest to `loc`; ties go to the lowest id.
inline RpId nearest_rp(const FingerprintDatabase& db, const Location& loc)
{
  if (db.empty())
    throw Error(Errc::empty_database, "nearest_rp on empty database");
  RpId best = db.records().front().rp_id;
  double best_d = std::numeric_limits<double>::infinity();
  for (const auto& rec : db.records()) {
    const double d = squared_distance(rec.location, loc);
    if (d < best_d) {
      best_d = d;
      best = rec.rp_id;
    }
  }
  return best;
}

struct Waypoint
{
  double t = 0.0;
  Location location;
};

struct Trajectory
{
  std::vector<Waypoint> waypoints;
  double speed_min = 0.6;
  double speed_max = 4.0;

  double start_time() const { return waypoints.empty() ? 0.0 : waypoints.front().t; }
  double end_time() const { return waypoints.empty() ? 0.0 : waypoints.back().t; }

  //! Piecewise-linear position; clamps outside the time range.
  Location position_at(double t) const
  {
    if (waypoints.empty())
      throw Error(Errc::invalid_argument, "empty trajectory");
    if (t <= waypoints.front().t)
      return waypoints.front().location;
    if (t >= waypoints.back().t)
      return waypoints.back().location;
    auto it = std::upper_bound(waypoints.begin(), waypoints.end(), t,
                               [](double v, const Waypoint& w) { return v < w.t; });
    const Waypoint& b = *it;
    const Waypoint& a = *(it - 1);
    const double f = (t - a.t) / (b.t - a.t);
    return {a.location.x + f * (b.location.x - a.location.x),
            a.location.y + f * (b.location.y - a.location.y)};
  }

  void validate(const Environment& env) const
  {
    if (waypoints.empty())
      throw Error(Errc::invalid_argument, "trajectory has no waypoints");
    for (std::size_t i = 0; i < waypoints.size(); ++i) {
      if (!env.contains(waypoints[i].location))
        throw Error(Errc::out_of_bounds, "trajectory waypoint " + std::to_string(i) + " exits bounds");
      if (i == 0)
        continue;
      const double dt = waypoints[i].t - waypoints[i - 1].t;
      if (!(dt > 0.0))
        throw Error(Errc::invalid_argument, "trajectory timestamps must increase strictly");
      const double d = distance(waypoints[i].location, waypoints[i - 1].location);
      if (d > speed_max * dt * (1.0 + 1e-9))
        throw Error(Errc::invalid_argument, "trajectory leg faster than speed_max");
    }
  }
};

} // namespace passloc
