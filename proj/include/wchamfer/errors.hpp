#pragma once

#include <stdexcept>
#include <string>

namespace wchamfer {

// Bad inputs, violated invariants, malformed file contents. CLI exit code 1.
class domain_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Missing files and failed OS-level reads/writes. CLI exit code 2.
class io_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace wchamfer
