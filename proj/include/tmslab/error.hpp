#pragma once

#include <stdexcept>
#include <string>

namespace tms {

// Exit-code classes used by the CLI: parse=1, precondition=2, numeric=3.
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct PreconditionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CapExceeded : PreconditionError {
  CapExceeded(std::size_t n, std::size_t cap)
      : PreconditionError("enumeration cap exceeded: n=" + std::to_string(n) +
                          " > cap=" + std::to_string(cap)) {}
};

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace tms
