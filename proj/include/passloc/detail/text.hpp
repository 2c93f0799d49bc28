#pragma once

#include "passloc/error.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace passloc::detail {

inline std::string trim(std::string_view s)
{
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos)
    return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split(std::string_view s, char delim)
{
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(delim, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? s.size() - start : pos - start)));
    if (pos == std::string_view::npos)
      break;
    start = pos + 1;
  }
  return out;
}

inline double parse_double(const std::string& s)
{
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE)
    throw Error(Errc::parse_error, "not a number: '" + s + "'");
  return v;
}

inline long long parse_int(const std::string& s)
{
  errno = 0;
  char* end = nullptr;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE)
    throw Error(Errc::parse_error, "not an integer: '" + s + "'");
  return v;
}

inline bool parse_bool(const std::string& s)
{
  if (s == "1" || s == "true" || s == "yes" || s == "rts")
    return true;
  if (s == "0" || s == "false" || s == "no" || s == "nors")
    return false;
  throw Error(Errc::parse_error, "not a boolean: '" + s + "'");
}

//! %.*g formatting; 9 digits for databases, 17 for checkpoints.
inline std::string fmt_g(double v, int digits)
{
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

//! Flat `key = value` lines. Blank lines and `#` comments are skipped; keys
//! may repeat and keep file order.
inline std::vector<std::pair<std::string, std::string>> read_key_values(std::istream& in)
{
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#')
      continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw Error(Errc::parse_error, "line " + std::to_string(lineno) + ": expected key = value");
    out.emplace_back(trim(std::string_view(t).substr(0, eq)), trim(std::string_view(t).substr(eq + 1)));
  }
  return out;
}

} // namespace passloc::detail
