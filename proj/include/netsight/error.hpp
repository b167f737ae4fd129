#pragma once

#include <stdexcept>
#include <string>

namespace netsight {

/// Process exit codes used by the command-line front end.
enum class ExitCode : int {
    ok = 0,
    config = 2,
    data = 3,
    numerical = 4,
};

/// Base class for every error raised by the library. Each subclass maps to
/// one exit code so the CLI can translate failures without string matching.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    [[nodiscard]] virtual ExitCode exit_code() const noexcept { return ExitCode::numerical; }
};

/// Bad or missing configuration values, unknown keys.
class ConfigError : public Error {
public:
    using Error::Error;
    [[nodiscard]] ExitCode exit_code() const noexcept override { return ExitCode::config; }
};

/// Rejected input data: dimension mismatch, malformed CSV, empty windows.
class DataError : public Error {
public:
    using Error::Error;
    [[nodiscard]] ExitCode exit_code() const noexcept override { return ExitCode::data; }
};

/// Caller violated a documented precondition (mismatched bins, misaligned sets).
class ContractError : public DataError {
public:
    using DataError::DataError;
};

/// Cosine similarity requested on a zero-norm vector.
class SimilarityError : public DataError {
public:
    using DataError::DataError;
};

/// Non-finite values during optimization or evaluation.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Operation invoked out of order (e.g. backward without a recorded forward).
class StateError : public Error {
public:
    using Error::Error;
};

}  // namespace netsight
