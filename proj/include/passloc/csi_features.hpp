#pragma once

// CSI feature types and the per-scan feature transforms. Kept free of the
// fingerprint database so the database can store scans without a cycle.

#include "passloc/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

namespace passloc {

using ApId = std::uint32_t;

inline constexpr std::size_t kSubcarriers = 51;
inline constexpr std::size_t kScansPerImage = 20;
inline constexpr std::size_t kPhaseDiffs = kSubcarriers - 1;

//! Wraps an angle to (-pi, pi].
inline double wrap_phase(double radians)
{
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double r = std::remainder(radians, two_pi);
  if (r <= -std::numbers::pi)
    r += two_pi;
  return r;
}

struct CsiScan
{
  ApId ap = 0;
  double timestamp = 0.0;
  std::array<double, kSubcarriers> amplitudes{};
  std::array<double, kSubcarriers> phases{};

  bool operator==(const CsiScan&) const = default;
};

//! Time x frequency amplitude matrix, one row per scan, oldest row first.
struct CsiImage
{
  std::array<std::array<double, kSubcarriers>, kScansPerImage> rows{};

  std::vector<double> flattened() const
  {
    std::vector<double> out;
    out.reserve(kScansPerImage * kSubcarriers);
    for (const auto& row : rows)
      out.insert(out.end(), row.begin(), row.end());
    return out;
  }

  bool operator==(const CsiImage&) const = default;
};

struct PhaseDiffVector
{
  std::array<double, kPhaseDiffs> values{};

  bool operator==(const PhaseDiffVector&) const = default;
};

//! Builds an image from the 20 most recent scans. Scans must come from a
//! single AP; they are ordered by timestamp (stable for equal stamps).
inline CsiImage build_image(std::span<const CsiScan> scans)
{
  if (scans.size() < kScansPerImage)
    throw Error(Errc::insufficient_csi,
                "need " + std::to_string(kScansPerImage) + " scans, got " +
                  std::to_string(scans.size()));
  for (const auto& s : scans) {
    if (s.ap != scans.front().ap)
      throw Error(Errc::invalid_argument, "scans from more than one AP");
    for (double a : s.amplitudes)
      if (!std::isfinite(a) || a < 0.0)
        throw Error(Errc::invalid_argument, "CSI amplitude must be finite and >= 0");
  }

  std::vector<const CsiScan*> order;
  order.reserve(scans.size());
  for (const auto& s : scans)
    order.push_back(&s);
  std::stable_sort(order.begin(), order.end(), [](const CsiScan* a, const CsiScan* b) {
    return a->timestamp < b->timestamp;
  });

  CsiImage image;
  const std::size_t first = order.size() - kScansPerImage;
  for (std::size_t r = 0; r < kScansPerImage; ++r)
    image.rows[r] = order[first + r]->amplitudes;
  return image;
}

inline PhaseDiffVector phase_difference(const CsiScan& scan)
{
  PhaseDiffVector out;
  for (std::size_t j = 0; j < kPhaseDiffs; ++j)
    out.values[j] = wrap_phase(scan.phases[j + 1] - scan.phases[j]);
  return out;
}

//! Element-wise circular mean of phase-difference vectors.
inline PhaseDiffVector circular_mean(std::span<const PhaseDiffVector> vectors)
{
  if (vectors.empty())
    throw Error(Errc::invalid_argument, "circular mean of zero vectors");
  PhaseDiffVector out;
  for (std::size_t j = 0; j < kPhaseDiffs; ++j) {
    double s = 0.0;
    double c = 0.0;
    for (const auto& v : vectors) {
      s += std::sin(v.values[j]);
      c += std::cos(v.values[j]);
    }
    out.values[j] = (s == 0.0 && c == 0.0) ? 0.0 : wrap_phase(std::atan2(s, c));
  }
  return out;
}

} // namespace passloc
