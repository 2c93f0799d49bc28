#pragma once

// Small fixtures shared by the test binaries.

#include "passloc.hpp"

#include <random>
#include <vector>

namespace passloc::testing {

inline Environment small_env(double w = 4.0, double h = 4.0, double spacing = 1.0)
{
  Environment env;
  env.width = w;
  env.height = h;
  env.grid_spacing = spacing;
  env.aps = {{0, {0.0, 0.0}, true}, {1, {w, h}, false}};
  env.rps = grid_rps(w, h, spacing);
  return env;
}

inline std::vector<RssiSample> samples_of(std::initializer_list<double> values)
{
  std::vector<RssiSample> out;
  double t = 0.0;
  for (double v : values)
    out.push_back({t += 1.0, v});
  return out;
}

inline CsiScan random_scan(std::mt19937_64& rng, ApId ap = 0, double t = 0.0)
{
  std::uniform_real_distribution<double> amp(0.1, 2.0);
  std::uniform_real_distribution<double> ph(-3.14159, 3.14159);
  CsiScan s;
  s.ap = ap;
  s.timestamp = t;
  for (std::size_t k = 0; k < kSubcarriers; ++k) {
    s.amplitudes[k] = amp(rng);
    s.phases[k] = wrap_phase(ph(rng));
  }
  return s;
}

} // namespace passloc::testing
