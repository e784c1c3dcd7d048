#pragma once

#include <stdexcept>
#include <string>

namespace lbow {

// Bad CLI arguments or invalid configuration. Maps to exit code 1.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed or missing input data. Maps to exit code 2.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite loss during training. Maps to exit code 3.
struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace lbow
