#pragma once

#include <stdexcept>
#include <string>

namespace ntklab {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Shape or length mismatch between operands.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Non-finite values, or a numerical procedure that failed to converge.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Input outside the domain an operation is defined on.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration (encoding, network, preset, config file).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// File could not be read, written or parsed.
class IoError : public Error {
public:
    using Error::Error;
};

/// Kernel system too ill-conditioned to solve even after ridge regularization.
class ConditioningError : public NumericError {
public:
    using NumericError::NumericError;
};

/// Requested Gram matrix exceeds the configured sample cap.
class CapacityError : public Error {
public:
    using Error::Error;
};

}  // namespace ntklab
