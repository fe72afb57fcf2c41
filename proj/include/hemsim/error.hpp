#pragma once

#include <stdexcept>
#include <string>

namespace hemsim {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input text (scenario file, CSV row, protocol line).
class ParseError : public Error {
public:
    using Error::Error;
};

/// Well-formed input that violates a documented invariant.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Disturbance data that cannot be aligned to the simulation grid.
class DataError : public Error {
public:
    using Error::Error;
};

/// Controller output rejected by the engine.
class ActionError : public Error {
public:
    using Error::Error;
};

}  // namespace hemsim
