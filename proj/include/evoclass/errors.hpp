#pragma once

#include <stdexcept>
#include <string>

namespace evoclass {

// Error families map onto process exit codes at the CLI boundary:
// ArgumentError -> 2, DataError -> 3, NumericError -> 4.
struct ArgumentError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace evoclass
