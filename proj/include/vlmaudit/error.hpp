#pragma once

#include <stdexcept>
#include <string>

namespace vlmaudit {

// Process exit codes used by the CLI.
enum class ExitCode : int {
    kOk = 0,
    kValidationFailure = 1,
    kConfigError = 2,
    kRuntimeError = 3,
};

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual ExitCode exit_code() const noexcept { return ExitCode::kRuntimeError; }
};

class ConfigError : public Error {
public:
    using Error::Error;
    ExitCode exit_code() const noexcept override { return ExitCode::kConfigError; }
};

class ValidationError : public Error {
public:
    using Error::Error;
    ExitCode exit_code() const noexcept override { return ExitCode::kValidationFailure; }
};

// Malformed input files (manifest, lexicon, fixture CSVs).
class LoadError : public Error {
public:
    LoadError(const std::string& what, std::size_t row = 0)
        : Error(row == 0 ? what : "row " + std::to_string(row) + ": " + what), row_(row) {}
    std::size_t row() const noexcept { return row_; }
    ExitCode exit_code() const noexcept override { return ExitCode::kValidationFailure; }

private:
    std::size_t row_;
};

class ComputationError : public Error {
public:
    using Error::Error;
};

// Caller broke an operation precondition.
class ContractError : public Error {
public:
    using Error::Error;
};

class CapabilityError : public Error {
public:
    using Error::Error;
};

class BackendError : public Error {
public:
    BackendError(std::string backend, const std::string& what)
        : Error("backend '" + backend + "': " + what), backend_(std::move(backend)) {}
    const std::string& backend() const noexcept { return backend_; }

private:
    std::string backend_;
};

class IoError : public Error {
public:
    IoError(std::string path, const std::string& what)
        : Error(what + ": " + path), path_(std::move(path)) {}
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

// Wraps a failure inside run_pipeline with the stage it happened in.
class StageError : public Error {
public:
    StageError(std::string stage, const Error& cause)
        : Error("stage '" + stage + "' failed: " + cause.what()),
          stage_(std::move(stage)),
          cause_code_(cause.exit_code()) {}
    const std::string& stage() const noexcept { return stage_; }
    ExitCode exit_code() const noexcept override { return cause_code_; }

private:
    std::string stage_;
    ExitCode cause_code_;
};

}  // namespace vlmaudit
