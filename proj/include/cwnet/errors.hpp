#pragma once

#include <stdexcept>
#include <string>

namespace cwnet {

// malformed or inconsistent input data (files, indices); CLI exit code 2
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// non-finite or numerically invalid computation; CLI exit code 3
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

} // namespace cwnet
