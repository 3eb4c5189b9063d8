#pragma once

#include <stdexcept>
#include <string>

namespace entsched {

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Invalid configuration (bad parameter value, dimension mismatch).
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& msg) : Error("config: " + msg) {}
};

/// Rejected scheduling action (busy qubit, duplicate link, worker overflow).
class ActionError : public Error {
public:
    explicit ActionError(const std::string& msg) : Error("action: " + msg) {}
};

/// File parse or I/O failure.
class IoError : public Error {
public:
    explicit IoError(const std::string& msg) : Error("io: " + msg) {}
};

/// Tensor/sequence shape mismatch (model fed wrong-width tokens, etc.).
class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& msg) : Error("shape: " + msg) {}
};

/// Numerical integration failure (non-finite state, trace drift).
class NumericError : public Error {
public:
    explicit NumericError(const std::string& msg) : Error("numeric: " + msg) {}
};

} // namespace entsched
