#pragma once

#include <stdexcept>
#include <string>

namespace rar {

// Error taxonomy used across the library. Dimension/parameter errors are
// programming-contract violations; parse/data errors come from external
// inputs; config errors from user-supplied configuration.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct DimensionError : Error {
  explicit DimensionError(const std::string& msg) : Error(msg) {}
};

struct ParameterError : Error {
  explicit ParameterError(const std::string& msg) : Error(msg) {}
};

struct ParseError : Error {
  explicit ParseError(const std::string& msg) : Error(msg) {}
};

struct DataError : Error {
  explicit DataError(const std::string& msg) : Error(msg) {}
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

struct TrainingError : Error {
  explicit TrainingError(const std::string& msg) : Error(msg) {}
};

}  // namespace rar
