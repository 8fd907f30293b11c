#ifndef HFEI_ERROR_HPP
#define HFEI_ERROR_HPP

#include <cmath>
#include <iostream>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>

namespace hfei
{

// Error categories surface in the CLI as "error[<category>]: ...".
enum class ErrorKind
{
  input,      // malformed or invalid user input
  ordering,   // stamp ordering violated
  spec,       // invalid model specification
  build,      // system-matrix construction mismatch
  transform,  // growth transform failure (non-positive level)
  data,       // insufficient or degenerate data
  numeric,    // non-finite values or failed factorization
  io          // filesystem problems
};

inline std::string_view to_string(ErrorKind kind)
{
  switch (kind) {
  case ErrorKind::input: return "input";
  case ErrorKind::ordering: return "ordering";
  case ErrorKind::spec: return "spec";
  case ErrorKind::build: return "build";
  case ErrorKind::transform: return "transform";
  case ErrorKind::data: return "data";
  case ErrorKind::numeric: return "numeric";
  case ErrorKind::io: return "io";
  }
  return "unknown";
}

class Error : public std::runtime_error
{
public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

// Missing observations are quiet NaNs throughout the library.
inline constexpr double missing = std::numeric_limits<double>::quiet_NaN();
inline bool is_missing(double x) { return std::isnan(x); }

inline void log_warning(std::string_view message)
{
  std::clog << "warning: " << message << '\n';
}

} // namespace hfei

#endif
