#pragma once

#include <stdexcept>
#include <string>

namespace sed {

// Base for every error raised by the library. The CLI maps the subclasses
// onto exit codes (usage/data problems -> 2, everything else -> 1).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class DataError : public Error {
public:
    using Error::Error;
};

class ParseError : public DataError {
public:
    using DataError::DataError;
};

class UsageError : public Error {
public:
    using Error::Error;
};

// NaN/Inf produced by an operation.
class NumericError : public Error {
public:
    using Error::Error;
};

} // namespace sed
