#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace simengine {

/// Base class of every exception thrown by the engine itself.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid level declarations (duplicate names, duplicate values, ...).
class SchemaError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration, detected before any replicate runs.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// API misuse, e.g. batch() outside a running script.
class UsageError : public Error {
public:
    using Error::Error;
};

/// Violations of the first/main/last job-array protocol.
class ProtocolError : public Error {
public:
    using Error::Error;
};

/// Unreadable, corrupt or incompatible archives and task files.
class ArchiveError : public Error {
public:
    using Error::Error;
};

class SummaryError : public Error {
public:
    using Error::Error;
};

class NotFoundError : public Error {
public:
    using Error::Error;
};

/// A failure raised from inside a simulation script. `call` describes the
/// failing operation and ends up in the error table.
class ScriptError : public Error {
public:
    explicit ScriptError(const std::string& message, std::string call = {})
        : Error(message), call_(std::move(call)) {}

    const std::string& call() const noexcept { return call_; }

private:
    std::string call_;
};

/// Invalid distribution parameters (negative sd, non-PD covariance, ...).
class DistributionError : public ScriptError {
public:
    using ScriptError::ScriptError;
};

}  // namespace simengine
