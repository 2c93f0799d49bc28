#pragma once

#include "passloc/core.hpp"

#include <cmath>
#include <numbers>
#include <span>
#include <vector>

namespace passloc::kde {

enum class KernelKind
{
  gaussian,
  epanechnikov,
  tophat
};

struct KernelSpec
{
  KernelKind kind = KernelKind::gaussian;
  double bandwidth = 2.0; // dBm

  void validate() const
  {
    if (!(bandwidth > 0.0) || !std::isfinite(bandwidth))
      throw Error(Errc::invalid_argument, "kernel bandwidth must be > 0");
  }
};

//! Standard symmetric kernels, each integrating to one.
inline double kernel_value(KernelKind kind, double u)
{
  switch (kind) {
    case KernelKind::gaussian:
      return std::exp(-0.5 * u * u) / std::sqrt(2.0 * std::numbers::pi);
    case KernelKind::epanechnikov:
      return std::abs(u) <= 1.0 ? 0.75 * (1.0 - u * u) : 0.0;
    case KernelKind::tophat:
      return std::abs(u) <= 1.0 ? 0.5 : 0.0;
  }
  return 0.0;
}

//! Kernel density over RSSI (dBm). Evaluated lazily from the stored samples:
//! p(v) = 1/(n h) * sum_x K((v - s_x) / h).
class RssiPdf
{
public:
  RssiPdf(std::vector<double> samples, KernelSpec kernel)
    : kernel_(kernel)
    , samples_(std::move(samples))
  {
    kernel_.validate();
    if (samples_.empty())
      throw Error(Errc::invalid_argument, "KDE fit needs at least one sample");
    for (double s : samples_)
      if (!std::isfinite(s))
        throw Error(Errc::invalid_argument, "KDE sample is not finite");
    norm_ = 1.0 / (static_cast<double>(samples_.size()) * kernel_.bandwidth);
  }

  double evaluate(double v) const
  {
    if (!std::isfinite(v))
      throw Error(Errc::invalid_argument, "KDE evaluation point is not finite");
    const double h = kernel_.bandwidth;
    double sum = 0.0;
    for (double s : samples_)
      sum += kernel_value(kernel_.kind, (v - s) / h);
    return norm_ * sum;
  }

  const KernelSpec& kernel() const { return kernel_; }
  const std::vector<double>& samples() const { return samples_; }
  std::size_t size() const { return samples_.size(); }
  double normalization() const { return norm_; }

private:
  KernelSpec kernel_;
  std::vector<double> samples_;
  double norm_ = 0.0;
};

inline RssiPdf fit(std::span<const double> samples, KernelSpec kernel = {})
{
  return RssiPdf(std::vector<double>(samples.begin(), samples.end()), kernel);
}

inline double evaluate(const RssiPdf& pdf, double v) { return pdf.evaluate(v); }

//! The "overall" density for one AP at one RP: every device's samples pooled
//! in device-name order, then in time order.
inline RssiPdf pooled_fit(const FingerprintRecord& record, ApId ap, KernelSpec kernel = {})
{
  auto it = record.rssi_samples.find(ap);
  std::vector<double> pooled;
  if (it != record.rssi_samples.end())
    for (const auto& [device, samples] : it->second)
      for (const auto& s : samples)
        pooled.push_back(s.rssi);
  if (pooled.empty())
    throw Error(Errc::no_samples,
                "rp " + std::to_string(record.rp_id) + " has no samples for AP " + std::to_string(ap));
  return RssiPdf(std::move(pooled), kernel);
}

} // namespace passloc::kde
