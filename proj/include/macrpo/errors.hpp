#pragma once

#include <stdexcept>
#include <string>

namespace macrpo {

// Bad configuration: unknown key, out-of-range value, dimension mismatch.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite value encountered in a forward pass, gradient, or loss.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller violated a precondition (empty sequence, bad action index, ...).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Environment failed while stepping.
class EnvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace macrpo
