#pragma once

#include <stdexcept>
#include <string>

namespace ctig {

// Bad inputs (rejections named by the contracts).
struct InvalidArg : std::invalid_argument {
  explicit InvalidArg(const std::string& m) : std::invalid_argument(m) {}
};

// Filesystem / serialization failures, message carries the path.
struct IoError : std::runtime_error {
  explicit IoError(const std::string& m) : std::runtime_error(m) {}
};

// Training divergence and other unrecoverable runtime states.
struct RuntimeFault : std::runtime_error {
  explicit RuntimeFault(const std::string& m) : std::runtime_error(m) {}
};

}  // namespace ctig
