#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace crowdmech {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Inconsistent or out-of-range configuration (m_i > M, empty grid, ...).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Malformed dataset / config / model file. Carries the 1-based line number
/// when the failure can be attributed to one.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
    explicit ParseError(const std::string& what) : Error(what), line_(0) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Two rows of a dataset disagree (duplicate (task, worker) pair, gold mismatch).
class ConflictError : public Error {
public:
    using Error::Error;
};

/// A Dirichlet pseudo-count collapsed to a non-positive value.
class InvalidPriorError : public Error {
public:
    using Error::Error;
};

/// A task without any label where one is required.
class CoverageError : public Error {
public:
    using Error::Error;
};

/// A solve failed even after jitter, or a formula is undefined at the input.
class NumericalError : public Error {
public:
    using Error::Error;
};

}  // namespace crowdmech
