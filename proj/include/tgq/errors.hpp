#pragma once

#include <stdexcept>
#include <string>

namespace tgq {

// Base type for all library errors. Subtypes exist so callers can
// distinguish bad bytes from bad arguments without parsing messages.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed container bytes (bad magic, unreadable header).
struct ParseError : Error {
    using Error::Error;
};

// Valid container, but a feature we deliberately do not handle
// (fortran order, exotic dtypes, newer versions).
struct UnsupportedFormat : Error {
    using Error::Error;
};

// Filesystem/stream failures, truncated payloads.
struct IoError : Error {
    using Error::Error;
};

// Payload bytes inconsistent with their own header.
struct CorruptPayload : Error {
    using Error::Error;
};

struct ShapeError : Error {
    using Error::Error;
};

struct InvalidRadius : Error {
    using Error::Error;
};

struct NonFiniteInput : Error {
    using Error::Error;
};

struct RangeError : Error {
    using Error::Error;
};

struct GridError : Error {
    using Error::Error;
};

struct InvalidMask : Error {
    using Error::Error;
};

struct EmptyCalibration : Error {
    using Error::Error;
};

struct ConfigError : Error {
    using Error::Error;
};

} // namespace tgq
