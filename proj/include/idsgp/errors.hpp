#pragma once

#include <stdexcept>
#include <string>

namespace idsgp {

/// Operand shapes do not satisfy an operation's shape rule.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A computation produced NaN/Inf, or a gradient was non-finite.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Jitter escalation reached its cap without a successful factorization.
class NotPositiveDefiniteError : public NumericError {
 public:
  NotPositiveDefiniteError(const std::string& what, double last_jitter)
      : NumericError(what), last_jitter_(last_jitter) {}
  double last_jitter() const noexcept { return last_jitter_; }

 private:
  double last_jitter_;
};

/// Invalid user-facing configuration; `key()` names the offending entry.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& what)
      : std::runtime_error(what), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

/// Input data could not be parsed or violates the dataset contract.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace idsgp
