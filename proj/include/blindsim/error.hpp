#pragma once

#include <stdexcept>
#include <string>

namespace blindsim {

/// A violated precondition on a named input field.
class ValidationError : public std::invalid_argument {
public:
  ValidationError(std::string field, const std::string& message)
      : std::invalid_argument(field + ": " + message), field_{std::move(field)} {}

  [[nodiscard]] const std::string& field() const noexcept { return field_; }

private:
  std::string field_;
};

/// Filesystem or serialization failure in the harness.
class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

} // namespace blindsim
