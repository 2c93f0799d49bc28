#pragma once

// Second step of active-phone localization: re-rank the SSP candidates by
// CSI similarity on the strongest APs.

#include "passloc/core.hpp"
#include "passloc/csi_features.hpp"
#include "passloc/ssp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <vector>

namespace passloc::csi {

//! Pearson correlation, two-pass. Throws zero_variance when either input is
//! constant.
inline double pearson(std::span<const double> a, std::span<const double> b)
{
  if (a.size() != b.size())
    throw Error(Errc::shape_mismatch, "pearson inputs differ in length");
  if (a.size() < 2)
    throw Error(Errc::invalid_argument, "pearson needs at least two elements");
  const double n = static_cast<double>(a.size());
  double ma = 0.0;
  double mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0;
  double saa = 0.0;
  double sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (!(saa > 0.0) || !(sbb > 0.0))
    throw Error(Errc::zero_variance, "pearson input is constant");
  const double r = sab / (std::sqrt(saa) * std::sqrt(sbb));
  return std::clamp(r, -1.0, 1.0);
}

//! Pearson that maps the zero-variance case to 0 similarity.
inline double pearson_or_zero(std::span<const double> a, std::span<const double> b)
{
  try {
    return pearson(a, b);
  } catch (const Error& e) {
    if (e.code() == Errc::zero_variance)
      return 0.0;
    throw;
  }
}

//! Observed CSI for one AP over the current update interval.
struct ObservedCsi
{
  CsiImage image;
  PhaseDiffVector phase; // circular mean over the scans
};

//! Builds the observed features from raw scans (>= 20 required).
inline ObservedCsi observe(std::span<const CsiScan> scans)
{
  ObservedCsi out;
  out.image = build_image(scans);
  std::vector<PhaseDiffVector> diffs;
  diffs.reserve(scans.size());
  for (const auto& s : scans)
    diffs.push_back(phase_difference(s));
  out.phase = circular_mean(diffs);
  return out;
}

struct RefineConfig
{
  std::size_t strongest_aps = 2; // L
  double w_amp = 0.5;
  double w_phase = 0.5;
};

struct Candidate
{
  RpId rp_id = 0;
  double posterior_weight = 0.0;
};

struct RefineResult
{
  RpId rp_id = 0;
  Location location;
  double similarity = 0.0;
};

//! Stored-side summary for one (RP, AP): the RP's images and the circular
//! mean of its phase-difference vectors.
struct StoredCsi
{
  const std::vector<CsiImage>* images = nullptr;
  PhaseDiffVector phase;
};

inline std::optional<StoredCsi> stored_features(const FingerprintRecord& rec, ApId ap)
{
  auto im = rec.csi_images.find(ap);
  auto ph = rec.csi_phase.find(ap);
  if (im == rec.csi_images.end() || im->second.empty() || ph == rec.csi_phase.end() || ph->second.empty())
    return std::nullopt;
  return StoredCsi{&im->second, circular_mean(ph->second)};
}

//! Similarity of one candidate on one AP: weighted amplitude-image and
//! phase-difference correlations. The amplitude term averages over the
//! candidate's stored images.
inline double ap_similarity(const ObservedCsi& obs, const StoredCsi& stored, const RefineConfig& cfg)
{
  const auto obs_flat = obs.image.flattened();
  double amp = 0.0;
  for (const auto& img : *stored.images)
    amp += pearson_or_zero(obs_flat, img.flattened());
  amp /= static_cast<double>(stored.images->size());
  const double phase = cfg.w_phase != 0.0 ? pearson_or_zero(obs.phase.values, stored.phase.values) : 0.0;
  return cfg.w_amp * amp + cfg.w_phase * phase;
}

//! The L APs with the strongest observed RSSI, strongest first (ties to the
//! lower AP position).
inline std::vector<std::size_t> strongest_aps(const FingerprintVector& rssi, std::size_t L)
{
  std::vector<std::size_t> idx;
  for (std::size_t k = 0; k < rssi.size(); ++k)
    if (rssi.features[k])
      idx.push_back(k);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return *rssi.features[a] > *rssi.features[b]; });
  if (idx.size() > L)
    idx.resize(L);
  return idx;
}

//! Picks the candidate whose stored CSI best matches the observation.
//! Returns nullopt (use the SSP estimate instead) when none of the L
//! strongest APs carries observed CSI or no candidate has stored CSI there.
inline std::optional<RefineResult> refine(std::span<const Candidate> candidates,
                                          const std::map<ApId, ObservedCsi>& observed,
                                          const FingerprintVector& rssi, const FingerprintDatabase& db,
                                          const RefineConfig& cfg = {})
{
  if (candidates.empty())
    throw Error(Errc::invalid_argument, "refine needs at least one candidate");
  if (cfg.strongest_aps == 0)
    throw Error(Errc::invalid_argument, "refine needs L >= 1");
  const auto& aps = db.environment().aps;
  if (rssi.size() != aps.size())
    throw Error(Errc::shape_mismatch, "rssi fingerprint does not match AP count");

  std::vector<const ObservedCsi*> obs;
  std::vector<ApId> obs_ap;
  for (auto k : strongest_aps(rssi, cfg.strongest_aps)) {
    auto it = observed.find(aps[k].id);
    if (it != observed.end()) {
      obs.push_back(&it->second);
      obs_ap.push_back(aps[k].id);
    }
  }
  if (obs.empty())
    return std::nullopt;

  if (candidates.size() == 1) {
    const auto& rec = db.at(candidates.front().rp_id);
    return RefineResult{rec.rp_id, rec.location, 0.0};
  }

  constexpr double eliminated = -std::numeric_limits<double>::infinity();
  std::optional<std::size_t> best;
  double best_sim = eliminated;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    const auto& rec = db.at(candidates[c].rp_id);
    double sum = 0.0;
    std::size_t used = 0;
    for (std::size_t j = 0; j < obs.size(); ++j) {
      auto stored = stored_features(rec, obs_ap[j]);
      if (!stored)
        continue;
      sum += ap_similarity(*obs[j], *stored, cfg);
      ++used;
    }
    const double sim = used > 0 ? sum / static_cast<double>(used) : eliminated;
    if (sim == eliminated)
      continue;
    bool take = !best.has_value() || sim > best_sim;
    if (!take && sim == best_sim) {
      const auto& cur = candidates[*best];
      const auto& cand = candidates[c];
      take = cand.posterior_weight > cur.posterior_weight ||
             (cand.posterior_weight == cur.posterior_weight && cand.rp_id < cur.rp_id);
    }
    if (take) {
      best = c;
      best_sim = sim;
    }
  }
  if (!best)
    return std::nullopt;
  const auto& rec = db.at(candidates[*best].rp_id);
  return RefineResult{rec.rp_id, rec.location, best_sim};
}

//! Candidates for refine() from an SSP posterior.
inline std::vector<Candidate> candidates_from(const ssp::Posterior& post, std::size_t k)
{
  std::vector<Candidate> out;
  for (auto i : ssp::top_k_indices(post, k))
    out.push_back({post.rp_ids[i], post.weights[i]});
  return out;
}

} // namespace passloc::csi
