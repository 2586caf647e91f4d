#pragma once

#include <stdexcept>
#include <string>

namespace gradforge {

/// Operand shapes do not line up (matrix/vector dims, tensor channels, ...).
class ShapeError : public std::runtime_error {
public:
    explicit ShapeError(const std::string& what) : std::runtime_error(what) {}
};

/// A value is outside its mathematical domain (empty dataset, label out of
/// range, resolution < 2, ...).
class DomainError : public std::runtime_error {
public:
    explicit DomainError(const std::string& what) : std::runtime_error(what) {}
};

/// An invalid combination of settings (bad learning rate, softmax loss on a
/// non-identity output layer, training with the step activation, ...).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed textual input; message carries the line number when known.
class ParseError : public std::runtime_error {
public:
    explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

/// A computation left the finite range (training cost went NaN/Inf).
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace gradforge
