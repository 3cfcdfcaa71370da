#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace ctap {

/// Invalid argument or precondition violation (wrong arity, out-of-range value, bad shape).
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Input for which the requested quantity is undefined, e.g. the dark state at zero coupling.
class DegenerateInputError : public ArgumentError {
 public:
  using ArgumentError::ArgumentError;
};

/// Non-finite values, failed convergence, or a violated physical invariant.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what, std::optional<std::size_t> step = std::nullopt)
      : std::runtime_error(step ? what + " (step " + std::to_string(*step) + ")" : what), step_(step) {}

  std::optional<std::size_t> step_index() const noexcept { return step_; }

 private:
  std::optional<std::size_t> step_;
};

/// API used out of order, e.g. stepping an episode that already finished.
class ProtocolError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Malformed configuration file. Carries the offending line (1-based, 0 if unknown) and key.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& what, std::size_t line = 0, std::string key = {})
      : std::runtime_error(format(what, line, key)), line_(line), key_(std::move(key)) {}

  std::size_t line() const noexcept { return line_; }
  const std::string& key() const noexcept { return key_; }

 private:
  static std::string format(const std::string& what, std::size_t line, const std::string& key) {
    std::string out;
    if (line > 0) out += "line " + std::to_string(line) + ": ";
    if (!key.empty()) out += "key '" + key + "': ";
    return out + what;
  }

  std::size_t line_;
  std::string key_;
};

}  // namespace ctap
