#pragma once

#include <stdexcept>
#include <string>

namespace passloc {

enum class Errc
{
  invalid_argument,
  unknown_rp,
  empty_database,
  no_samples,
  no_observable_aps,
  insufficient_csi,
  zero_variance,
  shape_mismatch,
  out_of_bounds,
  numeric_failure,
  grad_check_failed,
  parse_error,
  io_error,
};

inline const char* to_string(Errc code)
{
  switch (code) {
    case Errc::invalid_argument: return "invalid argument";
    case Errc::unknown_rp: return "unknown rp";
    case Errc::empty_database: return "empty database";
    case Errc::no_samples: return "no samples";
    case Errc::no_observable_aps: return "no observable APs";
    case Errc::insufficient_csi: return "insufficient CSI";
    case Errc::zero_variance: return "zero variance";
    case Errc::shape_mismatch: return "shape mismatch";
    case Errc::out_of_bounds: return "out of bounds";
    case Errc::numeric_failure: return "numeric failure";
    case Errc::grad_check_failed: return "gradient check failed";
    case Errc::parse_error: return "parse error";
    case Errc::io_error: return "io error";
  }
  return "unknown";
}

//! Every failure raised by the library carries one of the codes above so
//! callers can branch on the kind without parsing messages.
class Error : public std::runtime_error
{
public:
  Error(Errc code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what)
    , code_(code)
  {}

  Errc code() const noexcept { return code_; }

private:
  Errc code_;
};

} // namespace passloc
