#include "support.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <random>
#include <sstream>

using namespace passloc;
using passloc::testing::samples_of;
using passloc::testing::small_env;

namespace {

ObservationBatch batch(RpId rp, const std::string& device, ApId ap, std::initializer_list<double> values)
{
  ObservationBatch b;
  b.rp_id = rp;
  b.device = device;
  b.rssi[ap] = samples_of(values);
  return b;
}

std::string dump_dir(const std::filesystem::path& dir)
{
  std::ostringstream all;
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    std::ifstream in(f);
    all << f.filename().string() << "\n" << in.rdbuf();
  }
  return all.str();
}

std::filesystem::path scratch(const std::string& name)
{
  auto p = std::filesystem::temp_directory_path() / ("passloc_test_" + name);
  std::filesystem::remove_all(p);
  return p;
}

} // namespace

TEST(BuildDatabase, MinimalRecord)
{
  const auto env = small_env();
  const auto db = build_database(env, {batch(0, "samsung_s6", 0, {-50, -51, -52})});
  ASSERT_EQ(db.size(), 1u);
  EXPECT_EQ(db.records()[0].rp_id, 0u);
  EXPECT_EQ(db.records()[0].sample_count(0), 3u);
  EXPECT_EQ(db.records()[0].location, env.rps[0].location);
}

TEST(BuildDatabase, MergesDevicesUnderOneAp)
{
  const auto env = small_env();
  const auto db = build_database(env, {batch(3, "samsung_s6", 1, {-40}), batch(3, "htc_one_x", 1, {-41, -42})});
  ASSERT_EQ(db.size(), 1u);
  const auto& devices = db.at(3).rssi_samples.at(1);
  EXPECT_EQ(devices.size(), 2u);
  EXPECT_EQ(devices.at("htc_one_x").size(), 2u);
  EXPECT_EQ(db.at(3).sample_count(1), 3u);
}

TEST(BuildDatabase, ManyRpsAtMostOneKeyPerAp)
{
  Environment env;
  env.width = 40;
  env.height = 40;
  env.rps = grid_rps(40, 40, 1.0);
  for (ApId a = 0; a < 5; ++a)
    env.aps.push_back({a, {8.0 * a, 3.0}, a < 3});
  ASSERT_EQ(env.rps.size(), 1600u);
  std::vector<ObservationBatch> batches;
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> pick(0, 4);
  for (const auto& rp : env.rps) {
    ObservationBatch b;
    b.rp_id = rp.id;
    b.device = "nexus_5";
    for (int j = 0; j < 7; ++j)
      b.rssi[static_cast<ApId>(pick(rng))].push_back({double(j), -60.0 - j});
    batches.push_back(std::move(b));
  }
  const auto db = build_database(env, batches);
  EXPECT_EQ(db.size(), 1600u);
  for (const auto& rec : db.records())
    EXPECT_LE(rec.rssi_samples.size(), 5u);
}

TEST(BuildDatabase, RejectsUnknownRpAndEmptyInput)
{
  const auto env = small_env();
  try {
    build_database(env, {batch(999, "x", 0, {-50})});
    FAIL() << "expected unknown_rp";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::unknown_rp);
    EXPECT_NE(std::string(e.what()).find("999"), std::string::npos);
  }
  try {
    build_database(env, {});
    FAIL() << "expected empty_database";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::empty_database);
  }
}

TEST(BuildDatabase, SamplesSortedByTimestamp)
{
  const auto env = small_env();
  ObservationBatch a;
  a.rp_id = 1;
  a.device = "d";
  a.rssi[0] = {{5.0, -1}, {1.0, -2}, {3.0, -3}};
  ObservationBatch b = a;
  b.rssi[0] = {{2.0, -4}, {0.5, -5}};
  const auto db = build_database(env, {a, b});
  const auto& s = db.at(1).rssi_samples.at(0).at("d");
  ASSERT_EQ(s.size(), 5u);
  for (std::size_t i = 1; i < s.size(); ++i)
    EXPECT_LE(s[i - 1].timestamp, s[i].timestamp);
}

TEST(NearestRp, ExactAndTieBreak)
{
  Environment env;
  env.width = 10;
  env.height = 10;
  env.aps = {{0, {0, 0}, false}};
  env.rps = {{2, {2, 5}}, {7, {5, 5}}, {9, {8, 5}}};
  std::vector<ObservationBatch> bs;
  for (RpId id : {2u, 7u, 9u})
    bs.push_back(batch(id, "d", 0, {-50}));
  const auto db = build_database(env, bs);
  EXPECT_EQ(nearest_rp(db, {5, 5}), 7u);
  // (5,5) removed: equidistant to 2 and 9
  const auto db2 = build_database(env, {bs[0], bs[2]});
  EXPECT_EQ(nearest_rp(db2, {5, 5}), 2u);
}

TEST(NearestRp, MatchesExhaustiveScan)
{
  const auto env = small_env(4, 4, 1);
  std::vector<ObservationBatch> bs;
  for (const auto& rp : env.rps)
    bs.push_back(batch(rp.id, "d", 0, {-50}));
  const auto db = build_database(env, bs);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0, 4);
  for (int i = 0; i < 500; ++i) {
    const Location p{u(rng), u(rng)};
    RpId best = 0;
    double bd = 1e300;
    for (const auto& rp : env.rps) {
      const double dx = rp.location.x - p.x;
      const double dy = rp.location.y - p.y;
      const double d = dx * dx + dy * dy;
      if (d < bd || (d == bd && rp.id < best)) {
        bd = d;
        best = rp.id;
      }
    }
    EXPECT_EQ(nearest_rp(db, p), best);
  }
  for (const auto& rp : env.rps)
    EXPECT_EQ(nearest_rp(db, rp.location), rp.id);
}

TEST(NearestRp, EmptyDatabase)
{
  EXPECT_THROW(nearest_rp(FingerprintDatabase{}, {0, 0}), Error);
}

TEST(Environment, Validation)
{
  auto env = small_env();
  EXPECT_NO_THROW(env.validate());
  auto dup = env;
  dup.rps.push_back({99, env.rps[0].location});
  EXPECT_THROW(dup.validate(), Error);
  auto noap = env;
  noap.aps.clear();
  EXPECT_THROW(noap.validate(), Error);
  auto outside = env;
  outside.rps.push_back({100, {50, 50}});
  EXPECT_THROW(outside.validate(), Error);
}

TEST(GridRps, RowMajorDenseIds)
{
  const auto rps = grid_rps(3, 2, 1);
  ASSERT_EQ(rps.size(), 6u);
  for (std::size_t i = 0; i < rps.size(); ++i)
    EXPECT_EQ(rps[i].id, i);
  EXPECT_EQ(rps[1].location, (Location{1.5, 0.5}));
  EXPECT_EQ(rps[3].location, (Location{0.5, 1.5}));
}

TEST(Trajectory, InterpolationAndValidation)
{
  const auto env = small_env(10, 10);
  Trajectory t;
  t.waypoints = {{0, {1, 1}}, {2, {5, 1}}, {4, {5, 5}}};
  EXPECT_NO_THROW(t.validate(env));
  EXPECT_EQ(t.position_at(1.0), (Location{3, 1}));
  EXPECT_EQ(t.position_at(3.0), (Location{5, 3}));
  EXPECT_EQ(t.position_at(-1.0), (Location{1, 1}));
  EXPECT_EQ(t.position_at(9.0), (Location{5, 5}));

  auto fast = t;
  fast.speed_max = 1.0;
  EXPECT_THROW(fast.validate(env), Error);
  auto out = t;
  out.waypoints.push_back({6, {5, 11}});
  try {
    out.validate(env);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::out_of_bounds);
  }
  auto backwards = t;
  backwards.waypoints[2].t = 2.0;
  EXPECT_THROW(backwards.validate(env), Error);
}

TEST(DatabaseIo, RoundTripStructurallyEqual)
{
  const auto env = small_env();
  std::mt19937_64 rng(5);
  std::vector<ObservationBatch> bs;
  for (const auto& rp : env.rps) {
    ObservationBatch b;
    b.rp_id = rp.id;
    b.device = rp.id % 2 ? "a" : "b";
    // values with at most 9 significant digits survive the text format exactly
    for (int j = 0; j < 5; ++j)
      b.rssi[static_cast<ApId>(j % 2)].push_back({0.25 * j, -40.0 - 0.125 * static_cast<double>(rng() % 200)});
    if (rp.id == 5) {
      for (int s = 0; s < 20; ++s) {
        CsiScan scan;
        scan.ap = 1;
        for (std::size_t k = 0; k < kSubcarriers; ++k) {
          scan.amplitudes[k] = std::stod(passloc::detail::fmt_g(0.5 + 0.001 * static_cast<double>((s * 7 + k) % 97), 9));
          scan.phases[k] = wrap_phase(0.01 * static_cast<double>(s + k));
          scan.phases[k] = std::stod(passloc::detail::fmt_g(scan.phases[k], 9));
        }
        b.csi[1].push_back(scan);
      }
    }
    bs.push_back(std::move(b));
  }
  const auto db = build_database(env, bs);
  const auto dir = scratch("roundtrip");
  write_database(db, dir);
  const auto back = read_database(dir);
  EXPECT_TRUE(back == db);
  EXPECT_EQ(back.at(5).csi_images.at(1).size(), 1u);
  EXPECT_EQ(back.at(5).csi_phase.at(1).size(), 20u);
  std::filesystem::remove_all(dir);
}

TEST(DatabaseIo, TextIsIdempotentForSimulatedData)
{
  auto sc = desk_scenario();
  Environment env = small_env(3, 3);
  sc.env = env;
  sc.collect.dwell = 1.0;
  sc.collect.sessions = 1;
  sc.ssp.window.sigma = sc.ssp.window.d_max = 4.0;
  const auto db = eval::collect_training(sc, 2, {"samsung_s6"});
  const auto a = scratch("idem_a");
  const auto b = scratch("idem_b");
  write_database(db, a);
  write_database(read_database(a), b);
  EXPECT_EQ(dump_dir(a), dump_dir(b));
  std::filesystem::remove_all(a);
  std::filesystem::remove_all(b);
}

TEST(DatabaseIo, RejectsMalformedInput)
{
  std::istringstream bad_header("1,2\n");
  EXPECT_THROW(read_record(bad_header), Error);
  std::istringstream bad_row("0,0.5,0.5\n0,dev,1\n");
  EXPECT_THROW(read_record(bad_row), Error);
  std::istringstream truncated("0,0.5,0.5\n#csi 0 0\n0,1,0\n");
  EXPECT_THROW(read_record(truncated), Error);
  std::istringstream bad_env("width = 3\nheight = 3\nbogus = 1\n");
  EXPECT_THROW(read_environment(bad_env), Error);
  EXPECT_THROW(read_database(scratch("missing")), Error);
}
