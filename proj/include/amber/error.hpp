#pragma once

#include <stdexcept>
#include <string>

namespace amber {

// Error taxonomy. The CLI maps these onto exit codes: ConfigError -> 2,
// FormatError/DataError -> 3, EvalError -> 4.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Mismatched tensor shapes or lengths.
struct DimensionError : Error {
    using Error::Error;
};

// An out-of-range hyperparameter passed to a numeric routine.
struct ParameterError : Error {
    using Error::Error;
};

// A class index or element index out of range.
struct IndexError : Error {
    using Error::Error;
};

// An operation called on an object in the wrong state (no gradient, no
// seen prototype, incomplete accuracy matrix, ...).
struct StateError : Error {
    using Error::Error;
};

// Malformed binary dataset file.
struct FormatError : Error {
    using Error::Error;
};

// Requested data that the source cannot provide.
struct DataError : Error {
    using Error::Error;
};

// Non-finite value produced where a finite one is required.
struct EvalError : Error {
    using Error::Error;
};

// Invalid run configuration (bad key, bad value, missing field).
struct ConfigError : Error {
    using Error::Error;
};

} // namespace amber
