#pragma once

// Semi-sequential probabilistic (SSP) localization over the RP set. The score
// of RP i is the product of its per-AP RSSI likelihoods times a motion window
// centred on the previous estimate.

#include "passloc/core.hpp"
#include "passloc/kde.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

namespace passloc::ssp {

inline constexpr double kDensityFloor = 1e-12;

enum class WindowShape
{
  gaussian,
  hann,
  tukey
};

struct SspWindow
{
  WindowShape shape = WindowShape::gaussian;
  double sigma = 4.0; // m, gaussian spread
  double d_max = 4.0; // m, support of hann/tukey
  double tukey_alpha = 0.5;

  void validate() const
  {
    if (!(sigma > 0.0))
      throw Error(Errc::invalid_argument, "window sigma must be > 0");
    if (!(d_max > 0.0))
      throw Error(Errc::invalid_argument, "window d_max must be > 0");
    if (!(tukey_alpha >= 0.0 && tukey_alpha <= 1.0))
      throw Error(Errc::invalid_argument, "tukey alpha must lie in [0, 1]");
  }
};

//! Prior weight of an RP given the previous estimate. No previous estimate
//! means a uniform prior.
inline double window_weight(const SspWindow& win, const Location& rp, const std::optional<Location>& prev)
{
  if (!prev)
    return 1.0;
  const double d = distance(rp, *prev);
  switch (win.shape) {
    case WindowShape::gaussian:
      return std::exp(-(d * d) / (2.0 * win.sigma * win.sigma));
    case WindowShape::hann:
      if (d >= win.d_max)
        return 0.0;
      return 0.5 * (1.0 + std::cos(std::numbers::pi * d / win.d_max));
    case WindowShape::tukey: {
      if (d >= win.d_max)
        return 0.0;
      const double flat = (1.0 - win.tukey_alpha) * win.d_max;
      if (d <= flat)
        return 1.0;
      const double taper = win.tukey_alpha * win.d_max;
      return 0.5 * (1.0 + std::cos(std::numbers::pi * (d - flat) / taper));
    }
  }
  return 1.0;
}

//! Per-(RP, AP) densities fitted once from a database. Entries are empty
//! where an RP never heard an AP.
class LikelihoodModel
{
public:
  LikelihoodModel(const FingerprintDatabase& db, kde::KernelSpec kernel = {})
    : kernel_(kernel)
  {
    const auto& aps = db.environment().aps;
    ap_count_ = aps.size();
    rp_ids_.reserve(db.size());
    locations_.reserve(db.size());
    pdfs_.reserve(db.size() * ap_count_);
    for (const auto& rec : db.records()) {
      rp_ids_.push_back(rec.rp_id);
      locations_.push_back(rec.location);
      for (const auto& ap : aps) {
        if (rec.sample_count(ap.id) > 0)
          pdfs_.emplace_back(kde::pooled_fit(rec, ap.id, kernel));
        else
          pdfs_.emplace_back(std::nullopt);
      }
    }
  }

  std::size_t rp_count() const { return rp_ids_.size(); }
  std::size_t ap_count() const { return ap_count_; }
  RpId rp_id(std::size_t i) const { return rp_ids_[i]; }
  const Location& location(std::size_t i) const { return locations_[i]; }
  std::span<const RpId> rp_ids() const { return rp_ids_; }
  std::span<const Location> locations() const { return locations_; }
  const kde::KernelSpec& kernel() const { return kernel_; }

  const std::optional<kde::RssiPdf>& pdf(std::size_t rp_index, std::size_t ap_index) const
  {
    return pdfs_[rp_index * ap_count_ + ap_index];
  }

  //! Floored likelihood of one observation; absent densities take the floor.
  double likelihood(std::size_t rp_index, std::size_t ap_index, double rssi) const
  {
    const auto& p = pdf(rp_index, ap_index);
    if (!p)
      return kDensityFloor;
    return std::max(p->evaluate(rssi), kDensityFloor);
  }

private:
  kde::KernelSpec kernel_;
  std::size_t ap_count_ = 0;
  std::vector<RpId> rp_ids_;
  std::vector<Location> locations_;
  std::vector<std::optional<kde::RssiPdf>> pdfs_;
};

//! Probabilities over the RP set, parallel to the likelihood model's RP order.
struct Posterior
{
  std::vector<RpId> rp_ids;
  std::vector<double> weights;

  std::size_t size() const { return rp_ids.size(); }

  double weight_of(RpId id) const
  {
    for (std::size_t i = 0; i < rp_ids.size(); ++i)
      if (rp_ids[i] == id)
        return weights[i];
    return 0.0;
  }
};

//! Posterior over RPs for one fingerprint, accumulated in the log domain.
//! `likelihood(i, k, v)` returns the (already floored) density of reading v
//! from feature k at RP i. Missing features are skipped. If the window
//! excludes every RP the prior falls back to uniform.
template <class Likelihood>
Posterior posterior_with(std::span<const RpId> rp_ids, std::span<const Location> locations,
                         const FingerprintVector& obs, const std::optional<Location>& prev, const SspWindow& win,
                         Likelihood&& likelihood)
{
  win.validate();
  if (obs.observed_count() == 0)
    throw Error(Errc::no_observable_aps, "every feature is missing");
  if (rp_ids.empty())
    throw Error(Errc::empty_database, "posterior over an empty RP set");
  if (rp_ids.size() != locations.size())
    throw Error(Errc::shape_mismatch, "RP ids and locations differ in length");

  const std::size_t m = rp_ids.size();
  std::vector<double> window(m);
  bool any_window = false;
  for (std::size_t i = 0; i < m; ++i) {
    window[i] = window_weight(win, locations[i], prev);
    any_window = any_window || window[i] > 0.0;
  }
  if (!any_window)
    std::fill(window.begin(), window.end(), 1.0);

  std::vector<double> log_score(m, -std::numeric_limits<double>::infinity());
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < m; ++i) {
    if (window[i] <= 0.0)
      continue;
    double s = std::log(window[i]);
    for (std::size_t k = 0; k < obs.size(); ++k)
      if (obs.features[k])
        s += std::log(likelihood(i, k, *obs.features[k]));
    log_score[i] = s;
    best = std::max(best, s);
  }

  Posterior post;
  post.rp_ids.assign(rp_ids.begin(), rp_ids.end());
  post.weights.resize(m);
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    post.weights[i] = std::isfinite(log_score[i]) ? std::exp(log_score[i] - best) : 0.0;
    total += post.weights[i];
  }
  for (double& w : post.weights)
    w /= total;
  return post;
}

inline Posterior posterior(const LikelihoodModel& model, const FingerprintVector& obs,
                           const std::optional<Location>& prev, const SspWindow& win)
{
  if (obs.size() != model.ap_count())
    throw Error(Errc::shape_mismatch, "fingerprint has " + std::to_string(obs.size()) +
                                        " features, expected " + std::to_string(model.ap_count()));
  return posterior_with(model.rp_ids(), model.locations(), obs, prev, win,
                        [&](std::size_t i, std::size_t k, double v) { return model.likelihood(i, k, v); });
}

//! Indices into the posterior of the k most probable RPs, descending, ties to
//! the lowest RP id.
inline std::vector<std::size_t> top_k_indices(const Posterior& post, std::size_t k)
{
  if (k == 0)
    throw Error(Errc::invalid_argument, "top_k needs k >= 1");
  std::vector<std::size_t> idx(post.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const std::size_t take = std::min(k, idx.size());
  auto better = [&](std::size_t a, std::size_t b) {
    if (post.weights[a] != post.weights[b])
      return post.weights[a] > post.weights[b];
    return post.rp_ids[a] < post.rp_ids[b];
  };
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take), idx.end(), better);
  idx.resize(take);
  return idx;
}

inline std::vector<RpId> top_k(const Posterior& post, std::size_t k)
{
  std::vector<RpId> out;
  for (auto i : top_k_indices(post, k))
    out.push_back(post.rp_ids[i]);
  return out;
}

//! Probability-weighted centroid of the top-k RP locations.
inline Location estimate(const Posterior& post, const FingerprintDatabase& db, std::size_t k = 5)
{
  const auto best = top_k_indices(post, k);
  double total = 0.0;
  for (auto i : best)
    total += post.weights[i];
  if (!(total > 0.0))
    return db.at(post.rp_ids[best.front()]).location;
  Location out{0.0, 0.0};
  for (auto i : best) {
    const auto& loc = db.at(post.rp_ids[i]).location;
    const double w = post.weights[i] / total;
    out.x += w * loc.x;
    out.y += w * loc.y;
  }
  return out;
}

//! Convenience bundle: the localizer configuration with its usual defaults
//! (gaussian window, sigma = d_max = 4 m, top-5 centroid).
struct SspConfig
{
  SspWindow window{};
  std::size_t k = 5;
};

} // namespace passloc::ssp
