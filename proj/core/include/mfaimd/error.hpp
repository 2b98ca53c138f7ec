#pragma once

#include <stdexcept>
#include <string>

namespace mfaimd {

/// Rejected model configuration or invalid argument. `field()` names the
/// offending entry (e.g. "classes[0].r") when one is known.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::runtime_error(field.empty() ? message : field + ": " + message),
        field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Non-finite state, majorant overflow, or a NaN load.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A killed-process integral kept growing up to its hard time cap.
class InfiniteMassError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace mfaimd
