#pragma once

// On-disk fingerprint database: a directory holding `env.txt` (flat
// key = value geometry) and one `rp_<id>.csv` per record.
//
// Record file layout:
//   rp_id,x,y                     first line, values
//   ap_id,device,timestamp,rssi   one row per RSSI sample
//   #csi ap_id scan_index         followed by 51 rows
//   subcarrier,amplitude,phase_radians
//
// Floats are printed with 9 significant digits.

#include "passloc/core.hpp"
#include "passloc/detail/text.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

namespace passloc {

inline constexpr int kDatabaseDigits = 9;

inline void write_environment(std::ostream& out, const Environment& env)
{
  using detail::fmt_g;
  constexpr int d = kDatabaseDigits;
  out << "# passloc environment\n";
  out << "width = " << fmt_g(env.width, d) << "\n";
  out << "height = " << fmt_g(env.height, d) << "\n";
  out << "grid_spacing = " << fmt_g(env.grid_spacing, d) << "\n";
  for (const auto& ap : env.aps)
    out << "ap = " << ap.id << "," << fmt_g(ap.location.x, d) << "," << fmt_g(ap.location.y, d) << ","
        << (ap.rts_capable ? 1 : 0) << "\n";
  for (const auto& rp : env.rps)
    out << "rp = " << rp.id << "," << fmt_g(rp.location.x, d) << "," << fmt_g(rp.location.y, d) << "\n";
}

inline Environment read_environment(std::istream& in)
{
  Environment env;
  for (const auto& [key, value] : detail::read_key_values(in)) {
    if (key == "width") {
      env.width = detail::parse_double(value);
    } else if (key == "height") {
      env.height = detail::parse_double(value);
    } else if (key == "grid_spacing") {
      env.grid_spacing = detail::parse_double(value);
    } else if (key == "ap") {
      const auto f = detail::split(value, ',');
      if (f.size() != 4)
        throw Error(Errc::parse_error, "ap entry needs id,x,y,rts: " + value);
      env.aps.push_back({static_cast<ApId>(detail::parse_int(f[0])),
                         {detail::parse_double(f[1]), detail::parse_double(f[2])},
                         detail::parse_bool(f[3])});
    } else if (key == "rp") {
      const auto f = detail::split(value, ',');
      if (f.size() != 3)
        throw Error(Errc::parse_error, "rp entry needs id,x,y: " + value);
      env.rps.push_back({static_cast<RpId>(detail::parse_int(f[0])),
                         {detail::parse_double(f[1]), detail::parse_double(f[2])}});
    } else {
      throw Error(Errc::parse_error, "unknown environment key '" + key + "'");
    }
  }
  env.validate();
  return env;
}

inline void write_record(std::ostream& out, const FingerprintRecord& rec)
{
  using detail::fmt_g;
  constexpr int d = kDatabaseDigits;
  out << rec.rp_id << "," << fmt_g(rec.location.x, d) << "," << fmt_g(rec.location.y, d) << "\n";
  for (const auto& [ap, devices] : rec.rssi_samples)
    for (const auto& [device, samples] : devices)
      for (const auto& s : samples)
        out << ap << "," << device << "," << fmt_g(s.timestamp, d) << "," << fmt_g(s.rssi, d) << "\n";
  for (const auto& [ap, scans] : rec.csi_scans) {
    for (std::size_t i = 0; i < scans.size(); ++i) {
      out << "#csi " << ap << " " << i << "\n";
      for (std::size_t k = 0; k < kSubcarriers; ++k)
        out << k << "," << fmt_g(scans[i].amplitudes[k], d) << "," << fmt_g(scans[i].phases[k], d) << "\n";
    }
  }
}

inline FingerprintRecord read_record(std::istream& in)
{
  FingerprintRecord rec;
  std::string line;
  if (!std::getline(in, line))
    throw Error(Errc::parse_error, "record file is empty");
  {
    const auto f = detail::split(line, ',');
    if (f.size() != 3)
      throw Error(Errc::parse_error, "record header must be rp_id,x,y");
    rec.rp_id = static_cast<RpId>(detail::parse_int(f[0]));
    rec.location = {detail::parse_double(f[1]), detail::parse_double(f[2])};
  }
  while (std::getline(in, line)) {
    const std::string t = detail::trim(line);
    if (t.empty())
      continue;
    if (t.rfind("#csi", 0) == 0) {
      std::istringstream hs(t.substr(4));
      long long ap = -1;
      long long index = -1;
      if (!(hs >> ap >> index) || ap < 0 || index < 0)
        throw Error(Errc::parse_error, "bad csi block header: " + t);
      CsiScan scan;
      scan.ap = static_cast<ApId>(ap);
      for (std::size_t k = 0; k < kSubcarriers; ++k) {
        if (!std::getline(in, line))
          throw Error(Errc::parse_error, "truncated csi block");
        const auto f = detail::split(line, ',');
        if (f.size() != 3 || detail::parse_int(f[0]) != static_cast<long long>(k))
          throw Error(Errc::parse_error, "bad csi row: " + line);
        scan.amplitudes[k] = detail::parse_double(f[1]);
        scan.phases[k] = detail::parse_double(f[2]);
      }
      auto& scans = rec.csi_scans[scan.ap];
      if (static_cast<std::size_t>(index) != scans.size())
        throw Error(Errc::parse_error, "csi scan index out of order: " + t);
      scans.push_back(scan);
      continue;
    }
    const auto f = detail::split(t, ',');
    if (f.size() != 4)
      throw Error(Errc::parse_error, "bad sample row: " + t);
    const auto ap = static_cast<ApId>(detail::parse_int(f[0]));
    rec.rssi_samples[ap][f[1]].push_back({detail::parse_double(f[2]), detail::parse_double(f[3])});
  }
  rec.derive_csi_features();
  return rec;
}

inline void write_database(const FingerprintDatabase& db, const std::filesystem::path& dir)
{
  std::filesystem::create_directories(dir);
  {
    std::ofstream env(dir / "env.txt");
    if (!env)
      throw Error(Errc::io_error, "cannot write " + (dir / "env.txt").string());
    write_environment(env, db.environment());
  }
  for (const auto& rec : db.records()) {
    const auto path = dir / ("rp_" + std::to_string(rec.rp_id) + ".csv");
    std::ofstream out(path);
    if (!out)
      throw Error(Errc::io_error, "cannot write " + path.string());
    write_record(out, rec);
  }
}

inline FingerprintDatabase read_database(const std::filesystem::path& dir)
{
  std::ifstream env_in(dir / "env.txt");
  if (!env_in)
    throw Error(Errc::io_error, "cannot open " + (dir / "env.txt").string());
  Environment env = read_environment(env_in);

  std::vector<FingerprintRecord> records;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (name.rfind("rp_", 0) != 0 || entry.path().extension() != ".csv")
      continue;
    std::ifstream in(entry.path());
    auto rec = read_record(in);
    if (env.find_rp(rec.rp_id) == nullptr)
      throw Error(Errc::unknown_rp, "record file for unknown rp " + std::to_string(rec.rp_id));
    records.push_back(std::move(rec));
  }
  if (records.empty())
    throw Error(Errc::empty_database, "no record files in " + dir.string());
  return FingerprintDatabase(std::move(env), std::move(records));
}

} // namespace passloc
