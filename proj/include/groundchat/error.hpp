#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace groundchat {

enum class ErrorKind {
    input,         // undecodable or malformed user input
    precondition,  // caller violated an operation's precondition
    adapter,       // a model adapter failed or is unavailable
    config,        // invalid configuration
    not_found,     // unknown session, mask, file, ...
    overflow,      // context length or size cap exceeded
    format,        // malformed file or wire format
};

std::string_view to_string(ErrorKind kind);

/// Base exception for the library. `stage()` names the pipeline stage or
/// module that raised it, so callers can surface {code, message, stage}.
class Error : public std::runtime_error {
  public:
    Error(ErrorKind kind, std::string message, std::string stage = {})
        : std::runtime_error(std::move(message)), kind_(kind), stage_(std::move(stage)) {}

    ErrorKind kind() const noexcept { return kind_; }
    const std::string& stage() const noexcept { return stage_; }

  private:
    ErrorKind kind_;
    std::string stage_;
};

struct InputError : Error {
    explicit InputError(std::string message, std::string stage = {})
        : Error(ErrorKind::input, std::move(message), std::move(stage)) {}
};

struct PreconditionError : Error {
    explicit PreconditionError(std::string message, std::string stage = {})
        : Error(ErrorKind::precondition, std::move(message), std::move(stage)) {}
};

struct AdapterError : Error {
    explicit AdapterError(std::string message, std::string stage = {})
        : Error(ErrorKind::adapter, std::move(message), std::move(stage)) {}
};

struct ConfigError : Error {
    explicit ConfigError(std::string message, std::string stage = {})
        : Error(ErrorKind::config, std::move(message), std::move(stage)) {}
};

struct NotFoundError : Error {
    explicit NotFoundError(std::string message, std::string stage = {})
        : Error(ErrorKind::not_found, std::move(message), std::move(stage)) {}
};

struct OverflowError : Error {
    explicit OverflowError(std::string message, std::string stage = {})
        : Error(ErrorKind::overflow, std::move(message), std::move(stage)) {}
};

struct FormatError : Error {
    explicit FormatError(std::string message, std::string stage = {})
        : Error(ErrorKind::format, std::move(message), std::move(stage)) {}
};

} // namespace groundchat
