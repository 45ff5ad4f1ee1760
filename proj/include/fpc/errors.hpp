#pragma once

#include <stdexcept>
#include <string>

namespace fpc {

// I/O and file-format failures (missing files, bad magic, truncated data).
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Contract violations: bad arguments, shape mismatches, out-of-range values.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace fpc
