#pragma once

#include <stdexcept>
#include <string>

namespace prefrec {

// Base class for all toolkit errors. Subclasses map to failure categories
// so callers can catch by kind.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Input text/JSON could not be parsed.
struct ParseError : Error {
    using Error::Error;
};

// Parsed data violates a structural invariant (dangling ids, label drift).
struct ValidationError : Error {
    using Error::Error;
};

// Argument outside the operation's domain (bad ratios, empty input, K < 2).
struct DomainError : Error {
    using Error::Error;
};

// Prompt template rendering failed (missing variable).
struct TemplateError : Error {
    std::string slot;
    TemplateError(const std::string& msg, std::string slot_name)
        : Error(msg), slot(std::move(slot_name)) {}
};

// A generation or scoring backend failed (network, HTTP, mock dispatch).
struct BackendError : Error {
    int index = -1;  // chunk/candidate index when applicable
    explicit BackendError(const std::string& msg, int idx = -1) : Error(msg), index(idx) {}
};

// Backend returned an empty or unusable completion.
struct GenerationError : Error {
    using Error::Error;
};

// Non-finite value reached a numeric computation.
struct NumericalError : Error {
    using Error::Error;
};

// Persisted artifact (model file, fixture) has the wrong shape or version.
struct FormatError : Error {
    using Error::Error;
};

// Filesystem failure.
struct IoError : Error {
    using Error::Error;
};

// Remote service answered outside its protocol contract.
struct ProtocolError : Error {
    using Error::Error;
};

// Inconsistent run configuration.
struct ConfigError : Error {
    using Error::Error;
};

}  // namespace prefrec
