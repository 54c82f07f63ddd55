#pragma once

#include <stdexcept>
#include <string>

namespace pneumo {

// Invalid user input: bad config keys, non-positive dimensions, unknown names.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The physical model is ill-posed for the given design (singular operator).
class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A linear solve or optimizer step failed numerically.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A file could not be opened, written or parsed.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller broke a precondition (shape mismatch etc).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace pneumo
