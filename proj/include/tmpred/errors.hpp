#pragma once

#include <stdexcept>
#include <string>

namespace tmpred {

/// Base of all library errors. Two branches: InputError for invalid data,
/// configuration or precondition violations (CLI exit code 1), and
/// ComputeError for failures inside a computation (CLI exit code 2).
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class InputError : public Error {
public:
    using Error::Error;
};

class ComputeError : public Error {
public:
    using Error::Error;
};

// Malformed file content. Carries a 1-based line number when known.
class ParseError : public InputError {
public:
    explicit ParseError(const std::string& msg) : InputError(msg), line_(0) {}
    ParseError(const std::string& msg, std::size_t line)
        : InputError(msg + " (line " + std::to_string(line) + ")"), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

class OrderingError : public InputError {
public:
    using InputError::InputError;
};

class BoundsError : public InputError {
public:
    using InputError::InputError;
};

class SplitError : public InputError {
public:
    using InputError::InputError;
};

class DimensionError : public InputError {
public:
    using InputError::InputError;
};

class EmptyInputError : public InputError {
public:
    using InputError::InputError;
};

class DomainError : public InputError {
public:
    using InputError::InputError;
};

class InsufficientDataError : public InputError {
public:
    using InputError::InputError;
};

class ConfigError : public InputError {
public:
    using InputError::InputError;
};

// A demand between nodes with no connecting path.
class UnroutableError : public InputError {
public:
    using InputError::InputError;
};

// Non-finite values produced during a numeric computation.
class NumericError : public ComputeError {
public:
    using ComputeError::ComputeError;
};

class SolverError : public ComputeError {
public:
    using ComputeError::ComputeError;
};

} // namespace tmpred
