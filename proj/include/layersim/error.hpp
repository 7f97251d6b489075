#pragma once

#include <stdexcept>
#include <string>

namespace layersim {

enum class ErrorCode {
  InvalidArgument = 1,
  Io,
  Format,
  Invariant,
  Misaligned,
  OutOfRange,
  Degenerate,
};

// All library failures are reported as layersim::Error. The C API maps the
// code one-to-one onto lsim_status.
class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

} // namespace layersim
