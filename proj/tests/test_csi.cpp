#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <random>

using namespace passloc;
using passloc::testing::random_scan;

namespace {

std::vector<double> random_vec(std::mt19937_64& rng, std::size_t n)
{
  std::normal_distribution<double> z(0, 1);
  std::vector<double> v(n);
  for (auto& x : v)
    x = z(rng);
  return v;
}

double pearson_oracle(const std::vector<double>& a, const std::vector<double>& b)
{
  long double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= a.size();
  mb /= b.size();
  long double c = 0, va = 0, vb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    c += (a[i] - ma) * (b[i] - mb);
    va += (a[i] - ma) * (a[i] - ma);
    vb += (b[i] - mb) * (b[i] - mb);
  }
  return static_cast<double>(c / std::sqrt(va * vb));
}

double circ_dist(double a, double b)
{
  return std::abs(std::arg(std::polar(1.0, a) * std::conj(std::polar(1.0, b))));
}

// Scans for one RP/AP, images built from consecutive runs of 20.
std::vector<CsiScan> scans_for(std::mt19937_64& rng, ApId ap, std::size_t n = kScansPerImage)
{
  std::vector<CsiScan> out;
  for (std::size_t i = 0; i < n; ++i)
    out.push_back(random_scan(rng, ap, double(i)));
  return out;
}

} // namespace

TEST(Pearson, Examples)
{
  const std::vector<double> a{1, 2, 3}, b{2, 4, 6}, c{3, 2, 1}, k{5, 5, 5};
  EXPECT_NEAR(csi::pearson(a, b), 1.0, 1e-15);
  EXPECT_NEAR(csi::pearson(a, c), -1.0, 1e-15);
  try {
    csi::pearson(a, k);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::zero_variance);
  }
  EXPECT_EQ(csi::pearson_or_zero(a, k), 0.0);
  const std::vector<double> short_v{1, 2};
  EXPECT_THROW(csi::pearson(a, short_v), Error);
}

TEST(Pearson, MatchesTwoPassOracleOnImages)
{
  std::mt19937_64 rng(31);
  for (int t = 0; t < 20; ++t) {
    const auto a = random_vec(rng, kScansPerImage * kSubcarriers);
    auto b = random_vec(rng, a.size());
    for (std::size_t i = 0; i < a.size(); ++i)
      b[i] += 0.3 * t * a[i];
    EXPECT_NEAR(csi::pearson(a, b), pearson_oracle(a, b), 1e-12);
  }
}

TEST(Pearson, SymmetryBoundsScaleInvariance)
{
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> scale(-50, 50), shift(-100, 100);
  for (int t = 0; t < 1000; ++t) {
    const auto a = random_vec(rng, 40);
    const auto b = random_vec(rng, 40);
    const double r = csi::pearson(a, b);
    EXPECT_NEAR(csi::pearson(a, a), 1.0, 1e-12);
    EXPECT_EQ(r, csi::pearson(b, a));
    EXPECT_LE(std::abs(r), 1.0);
    double c = scale(rng);
    if (c == 0.0)
      c = 1.0;
    const double d = shift(rng);
    std::vector<double> cb(b.size());
    for (std::size_t i = 0; i < b.size(); ++i)
      cb[i] = c * b[i] + d;
    EXPECT_NEAR(csi::pearson(a, cb), (c > 0 ? 1.0 : -1.0) * r, 1e-12);
  }
}

TEST(PhaseDifference, ConstantAndRamp)
{
  CsiScan flat;
  for (auto& p : flat.phases)
    p = 1.25;
  for (double v : phase_difference(flat).values)
    EXPECT_EQ(v, 0.0);

  const double beta = 0.125;
  CsiScan ramp;
  for (std::size_t k = 0; k < kSubcarriers; ++k)
    ramp.phases[k] = wrap_phase(-3.0 + beta * static_cast<double>(k));
  for (double v : phase_difference(ramp).values)
    EXPECT_NEAR(v, beta, 1e-14);
}

TEST(PhaseDifference, WrapAwareOracleNearBoundary)
{
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> near(-0.2, 0.2);
  for (int t = 0; t < 200; ++t) {
    CsiScan s;
    for (auto& p : s.phases)
      p = wrap_phase(std::numbers::pi + near(rng));
    const auto d = phase_difference(s);
    for (std::size_t j = 0; j < kPhaseDiffs; ++j) {
      const double oracle = std::arg(std::polar(1.0, s.phases[j + 1]) * std::conj(std::polar(1.0, s.phases[j])));
      EXPECT_NEAR(d.values[j], oracle, 1e-14);
      EXPECT_GT(d.values[j], -std::numbers::pi);
      EXPECT_LE(d.values[j], std::numbers::pi);
    }
  }
}

TEST(PhaseDifference, GlobalOffsetInvariance)
{
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> q(-1024, 1024);
  for (int t = 0; t < 1000; ++t) {
    // dyadic phases, offsets that never carry a phase across the wrap: exact
    CsiScan s;
    for (auto& p : s.phases)
      p = q(rng) / 1024.0;
    const double theta = q(rng) / 1024.0;
    CsiScan shifted = s;
    for (auto& p : shifted.phases)
      p = wrap_phase(p + theta);
    EXPECT_EQ(phase_difference(s), phase_difference(shifted));

    // arbitrary phases and offsets: equal on the circle
    auto r = random_scan(rng);
    const double big = std::uniform_real_distribution<double>(-10, 10)(rng);
    CsiScan rs = r;
    for (auto& p : rs.phases)
      p = wrap_phase(p + big);
    const auto a = phase_difference(r);
    const auto b = phase_difference(rs);
    for (std::size_t j = 0; j < kPhaseDiffs; ++j)
      EXPECT_LT(circ_dist(a.values[j], b.values[j]), 1e-14);
  }
}

TEST(BuildImage, MostRecentTwentyInTimeOrder)
{
  std::mt19937_64 rng(9);
  auto scans = scans_for(rng, 3, 25);
  std::shuffle(scans.begin(), scans.end(), rng);
  const auto img = build_image(scans);
  std::vector<CsiScan> sorted = scans;
  std::sort(sorted.begin(), sorted.end(), [](auto& a, auto& b) { return a.timestamp < b.timestamp; });
  for (std::size_t r = 0; r < kScansPerImage; ++r)
    EXPECT_EQ(img.rows[r], sorted[5 + r].amplitudes);
  EXPECT_EQ(img.flattened().size(), 1020u);
}

TEST(BuildImage, Errors)
{
  std::mt19937_64 rng(1);
  auto few = scans_for(rng, 0, 19);
  try {
    build_image(few);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::insufficient_csi);
  }
  auto mixed = scans_for(rng, 0, 20);
  mixed[4].ap = 1;
  EXPECT_THROW(build_image(mixed), Error);
  auto negative = scans_for(rng, 0, 20);
  negative[0].amplitudes[3] = -1;
  EXPECT_THROW(build_image(negative), Error);
}

TEST(CircularMean, Basics)
{
  PhaseDiffVector a, b;
  a.values.fill(3.0);
  b.values.fill(-3.0);
  std::vector<PhaseDiffVector> v{a, b};
  for (double x : circular_mean(v).values)
    EXPECT_NEAR(std::abs(x), std::numbers::pi, 1e-12); // not 0, the arithmetic mean
  std::vector<PhaseDiffVector> none;
  EXPECT_THROW(circular_mean(none), Error);
}

namespace {

struct CsiFixture
{
  FingerprintDatabase db;
  std::map<RpId, std::vector<CsiScan>> stored;
};

// Five RPs, two APs, each RP holding one random 20-scan CSI block per AP.
CsiFixture csi_db(std::mt19937_64& rng)
{
  Environment env;
  env.width = 10;
  env.height = 2;
  env.aps = {{0, {0, 0}, false}, {1, {10, 2}, false}};
  std::vector<ObservationBatch> bs;
  CsiFixture f;
  for (RpId i = 0; i < 5; ++i) {
    env.rps.push_back({i, {1.0 + 2.0 * i, 1.0}});
    ObservationBatch b;
    b.rp_id = i;
    b.device = "d";
    for (ApId a : {0u, 1u}) {
      b.rssi[a] = passloc::testing::samples_of({-50});
      b.csi[a] = scans_for(rng, a);
    }
    f.stored[i] = b.csi[0];
    bs.push_back(b);
  }
  f.db = build_database(env, bs);
  return f;
}

FingerprintVector rssi_fv(double a, double b)
{
  FingerprintVector f;
  f.features = {a, b};
  return f;
}

} // namespace

TEST(Refine, ExactMatchWins)
{
  std::mt19937_64 rng(13);
  const auto f = csi_db(rng);
  for (RpId truth = 0; truth < 5; ++truth) {
    std::map<ApId, csi::ObservedCsi> obs;
    obs[0] = csi::observe(f.stored.at(truth));
    std::vector<csi::Candidate> cands;
    for (RpId i = 0; i < 5; ++i)
      cands.push_back({i, 0.2});
    csi::RefineConfig cfg;
    cfg.strongest_aps = 1;
    const auto r = csi::refine(cands, obs, rssi_fv(-40, -70), f.db, cfg);
    ASSERT_TRUE(r);
    EXPECT_EQ(r->rp_id, truth);
    EXPECT_EQ(r->location, f.db.at(truth).location);
    EXPECT_NEAR(r->similarity, 1.0, 1e-12);
  }
}

TEST(Refine, AgreesWithExhaustiveScoring)
{
  std::mt19937_64 rng(77);
  std::normal_distribution<double> noise(0, 0.3);
  for (int trial = 0; trial < 30; ++trial) {
    const auto f = csi_db(rng);
    const RpId truth = static_cast<RpId>(trial % 5);
    std::map<ApId, csi::ObservedCsi> obs;
    for (ApId a : {0u, 1u}) {
      auto scans = f.db.at(truth).csi_scans.at(a);
      for (auto& s : scans)
        for (auto& x : s.amplitudes)
          x = std::abs(x + noise(rng));
      obs[a] = csi::observe(scans);
    }
    std::vector<csi::Candidate> cands;
    for (RpId i = 0; i < 5; ++i)
      cands.push_back({i, 0.1 * (i + 1)});
    const csi::RefineConfig cfg;
    const auto r = csi::refine(cands, obs, rssi_fv(-45, -60), f.db, cfg);
    ASSERT_TRUE(r);

    // oracle: recompute every candidate's score from the definition
    double best = -2;
    RpId arg = 0;
    for (RpId i = 0; i < 5; ++i) {
      double s = 0;
      for (ApId a : {0u, 1u}) {
        const auto& rec = f.db.at(i);
        const double amp = pearson_oracle(obs[a].image.flattened(), rec.csi_images.at(a)[0].flattened());
        const auto sp = circular_mean(rec.csi_phase.at(a));
        const std::vector<double> ov(obs[a].phase.values.begin(), obs[a].phase.values.end());
        const std::vector<double> sv(sp.values.begin(), sp.values.end());
        s += 0.5 * amp + 0.5 * pearson_oracle(ov, sv);
      }
      s /= 2;
      if (s > best) {
        best = s;
        arg = i;
      }
    }
    EXPECT_EQ(r->rp_id, arg);
    EXPECT_NEAR(r->similarity, best, 1e-12);
  }
}

TEST(Refine, EqualImagesFallBackToSspOrder)
{
  std::mt19937_64 rng(5);
  const auto scans = scans_for(rng, 0);
  Environment env;
  env.width = 10;
  env.height = 2;
  env.aps = {{0, {0, 0}, false}, {1, {10, 2}, false}};
  std::vector<ObservationBatch> bs;
  for (RpId i = 0; i < 4; ++i) {
    env.rps.push_back({i, {1.0 + 2.0 * i, 1.0}});
    ObservationBatch b;
    b.rp_id = i;
    b.device = "d";
    b.rssi[0] = passloc::testing::samples_of({-50});
    b.csi[0] = scans;
    bs.push_back(b);
  }
  const auto db = build_database(env, bs);
  std::map<ApId, csi::ObservedCsi> obs;
  obs[0] = csi::observe(scans_for(rng, 0));
  csi::RefineConfig cfg;
  cfg.w_phase = 0;
  std::vector<csi::Candidate> cands{{3, 0.1}, {1, 0.4}, {2, 0.4}, {0, 0.1}};
  EXPECT_EQ(csi::refine(cands, obs, rssi_fv(-40, -50), db, cfg)->rp_id, 1u);
  std::vector<csi::Candidate> flat{{3, 0.25}, {2, 0.25}, {1, 0.25}, {0, 0.25}};
  EXPECT_EQ(csi::refine(flat, obs, rssi_fv(-40, -50), db, cfg)->rp_id, 0u);
}

TEST(Refine, FallbacksAndErrors)
{
  std::mt19937_64 rng(3);
  const auto f = csi_db(rng);
  std::vector<csi::Candidate> cands{{0, 0.5}, {1, 0.5}};
  std::map<ApId, csi::ObservedCsi> none;
  EXPECT_FALSE(csi::refine(cands, none, rssi_fv(-40, -50), f.db));

  // CSI only on an AP outside the L strongest
  std::map<ApId, csi::ObservedCsi> weak;
  weak[1] = csi::observe(f.stored.at(0));
  csi::RefineConfig one;
  one.strongest_aps = 1;
  EXPECT_FALSE(csi::refine(cands, weak, rssi_fv(-40, -50), f.db, one));
  EXPECT_TRUE(csi::refine(cands, weak, rssi_fv(-60, -50), f.db, one));

  std::vector<csi::Candidate> single{{4, 1.0}};
  std::map<ApId, csi::ObservedCsi> obs;
  obs[0] = csi::observe(f.stored.at(0));
  EXPECT_EQ(csi::refine(single, obs, rssi_fv(-40, -50), f.db)->rp_id, 4u);

  std::vector<csi::Candidate> empty;
  EXPECT_THROW(csi::refine(empty, obs, rssi_fv(-40, -50), f.db), Error);
  FingerprintVector bad;
  bad.features = {-40.0};
  EXPECT_THROW(csi::refine(cands, obs, bad, f.db), Error);
}

TEST(StrongestAps, OrderAndMissing)
{
  FingerprintVector f;
  f.features = {-70.0, std::nullopt, -40.0, -55.0, -40.0};
  EXPECT_EQ(csi::strongest_aps(f, 2), (std::vector<std::size_t>{2, 4}));
  EXPECT_EQ(csi::strongest_aps(f, 9), (std::vector<std::size_t>{2, 4, 3, 0}));
}
