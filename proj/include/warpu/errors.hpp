#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace warpu {

// Bad arguments: wrong dimension, malformed mixture, empty sample sets.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Something went numerically wrong (NaN, singular factor, no convergence).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Every term of an index distribution was -inf.
class DegenerateStateError : public NumericError {
 public:
  using NumericError::NumericError;
};

// Bridge iteration with no usable overlap between the two sample sets.
class OverlapError : public NumericError {
 public:
  using NumericError::NumericError;
};

class ConvergenceError : public NumericError {
 public:
  ConvergenceError(const std::string& what, double last) : NumericError(what), last_iterate(last) {}
  double last_iterate;
};

// Collects every violated field so the caller can report them together.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(std::vector<std::string> problems)
      : std::invalid_argument(join(problems)), problems_(std::move(problems)) {}
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  static std::string join(const std::vector<std::string>& p) {
    std::string out = "invalid configuration:";
    for (const auto& s : p) out += "\n  " + s;
    return out;
  }
  std::vector<std::string> problems_;
};

}  // namespace warpu
