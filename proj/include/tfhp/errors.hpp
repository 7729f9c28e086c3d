#pragma once

#include <stdexcept>
#include <string>

namespace tfhp {

/// Invalid parameters detected when a model object is constructed.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Base of every failure raised while evaluating or simulating.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DomainError : public NumericError {
public:
    using NumericError::NumericError;
};

/// Argument outside the range where a series evaluation is trustworthy.
class RangeError : public NumericError {
public:
    using NumericError::NumericError;
};

class OverflowError : public NumericError {
public:
    using NumericError::NumericError;
};

class NotImplementedError : public NumericError {
public:
    using NumericError::NumericError;
};

class InversionError : public NumericError {
public:
    InversionError(const std::string& what, double abscissa)
        : NumericError(what), abscissa_(abscissa) {}

    double abscissa() const noexcept { return abscissa_; }

private:
    double abscissa_;
};

class IntegrationError : public NumericError {
public:
    using NumericError::NumericError;
};

/// Path length or event count exceeded its configured cap.
class ResourceError : public NumericError {
public:
    using NumericError::NumericError;
};

class StepSizeError : public NumericError {
public:
    using NumericError::NumericError;
};

/// Analytic moment requested for a non-stationary parameter set (gamma <= 0).
class StationarityError : public NumericError {
public:
    using NumericError::NumericError;
};

class ConsistencyError : public NumericError {
public:
    using NumericError::NumericError;
};

}  // namespace tfhp
