#pragma once

#include <stdexcept>
#include <string>

namespace taper {

/// Base error for all failures raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid or inconsistent configuration (CLI exit code 1).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Non-finite values encountered during optimization (CLI exit code 3).
class NumericError : public Error {
public:
    using Error::Error;
};

}  // namespace taper
