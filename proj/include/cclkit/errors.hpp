#pragma once

#include <stdexcept>
#include <string>

namespace cclkit {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input data (bad JSON, unknown enum name, bad record shape).
class ParseError : public Error {
public:
    using Error::Error;
};

/// Structurally valid data that violates a domain invariant.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Filesystem failures; message carries the offending path.
class IoError : public Error {
public:
    using Error::Error;
};

/// Remote endpoint failures (transport errors, bad status after retries,
/// unusable response bodies).
class EndpointError : public Error {
public:
    using Error::Error;
};

/// The pipeline ran out of generation/validation attempts for an item.
class ValidationExhaustedError : public Error {
public:
    using Error::Error;
};

} // namespace cclkit
