#pragma once

#include <stdexcept>
#include <string>

namespace ridgeless {

/// Bad input: dimension mismatch, index out of range, invalid parameter.
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A numerical routine could not produce a trustworthy result.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Condition number requested for a rank-0 factorization.
class UndefinedConditionError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class NotPsdError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// A rank-one update formula was called outside its applicability conditions.
class PreconditionError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class DegenerateUpdateError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// Gradient descent diverged; the step size is too large.
class StepSizeError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// Config file or override could not be parsed or validated.
class ConfigError : public InputError {
public:
    ConfigError(const std::string& what, std::string field, int line = 0)
        : InputError(what), field_(std::move(field)), line_(line) {}

    [[nodiscard]] const std::string& field() const noexcept { return field_; }
    [[nodiscard]] int line() const noexcept { return line_; }

private:
    std::string field_;
    int line_;
};

}  // namespace ridgeless
