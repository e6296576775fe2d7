#pragma once

#include <stdexcept>
#include <string>

namespace pufsim {

/// Malformed arguments: empty challenges, width or shape mismatches.
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Requested more distinct challenges than the generator state space holds.
class InsufficientSpace : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A file could not be parsed. The message names the line or byte offset.
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A file parsed but its contents are inconsistent (e.g. record widths).
class SchemaError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Non-finite loss or gradient during training.
class TrainingDivergence : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace pufsim
