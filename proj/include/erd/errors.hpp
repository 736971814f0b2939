#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace erd {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Caller broke a documented precondition.
class ContractViolation : public Error {
public:
    using Error::Error;
};

// Data failed an invariant check (duplicate ids, empty corpus, bad config).
class ValidationError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

// Non-finite loss, logit, gradient or parameter.
class NumericalError : public Error {
public:
    using Error::Error;
};

// Checkpoint file is corrupt, has the wrong version or does not match the caller.
class CheckpointError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

enum class ProtocolErrorKind { not_found, conflict, gone, validation, transport };

const char* to_string(ProtocolErrorKind kind) noexcept;

// Mock-server protocol failure. Carries the offending user ids for validation errors.
class ProtocolError : public Error {
public:
    ProtocolError(ProtocolErrorKind kind, const std::string& what,
                  std::vector<std::string> offenders = {})
        : Error(what), kind_(kind), offenders_(std::move(offenders)) {}

    ProtocolErrorKind kind() const noexcept { return kind_; }
    const std::vector<std::string>& offenders() const noexcept { return offenders_; }

private:
    ProtocolErrorKind kind_;
    std::vector<std::string> offenders_;
};

}  // namespace erd
