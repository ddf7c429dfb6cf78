#pragma once

#include <stdexcept>
#include <string>

namespace spg {

// Exit-code mapping (see cli): ConfigError -> 2, GateFailure -> 3,
// anything else -> 4.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& m) : std::runtime_error(m) {}
};

struct DataError : std::runtime_error {
  explicit DataError(const std::string& m) : std::runtime_error(m) {}
};

// A prerequisite gate (prior invariance probe, recognizer accuracy, ...)
// was not met; downstream experiments would be meaningless.
struct GateFailure : std::runtime_error {
  explicit GateFailure(const std::string& m) : std::runtime_error(m) {}
};

// NaN loss or similar mid-training fault; message carries step diagnostics.
struct TrainingAbort : std::runtime_error {
  explicit TrainingAbort(const std::string& m) : std::runtime_error(m) {}
};

}  // namespace spg
