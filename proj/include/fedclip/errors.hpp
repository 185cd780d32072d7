#pragma once

#include <stdexcept>
#include <string>

namespace fedclip {

/// Base class for every error thrown by this library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operands with incompatible dimensions.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// NaN or infinity where a finite value is required.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration value or combination.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// File or format problem.
class IoError : public Error {
public:
    using Error::Error;
};

} // namespace fedclip
