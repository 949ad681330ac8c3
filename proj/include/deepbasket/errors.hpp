#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace deepbasket {

// Root of every error the library throws. Each subclass maps to one CLI exit
// status (see exit_code()).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad arguments to a pure function (empty payoff vector, negative vol, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

// A domain object violates its invariants (non-PSD matrix, bad plan, ...).
class ValidationError : public Error {
public:
    using Error::Error;
};

// Matrix/vector dimensions do not line up.
class ShapeError : public Error {
public:
    using Error::Error;
};

// Forward cache does not belong to the model or labels passed to backward().
class ContractError : public Error {
public:
    using Error::Error;
};

// Malformed or truncated dataset/checkpoint file.
class FormatError : public Error {
public:
    FormatError(const std::string& what, std::uint64_t byte_offset);
    std::uint64_t byte_offset() const noexcept { return byte_offset_; }

private:
    std::uint64_t byte_offset_;
};

// NaN/Inf during training or evaluation.
class NumericalError : public Error {
public:
    using Error::Error;
};

// Invalid CLI configuration; the message names the offending field.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Filesystem failures (open, write, rename).
class IoError : public Error {
public:
    using Error::Error;
};

enum class ExitCode : int {
    Ok = 0,
    Failure = 1,
    Config = 2,
    DataFormat = 3,
    Numerical = 4,
};

ExitCode exit_code(const std::exception& e) noexcept;

}  // namespace deepbasket
