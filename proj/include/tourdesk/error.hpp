#pragma once

#include <stdexcept>
#include <string>

namespace tourdesk {

// Base for every error raised by the library. `code()` is a stable,
// machine-readable identifier used in API error bodies.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(message), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

// Malformed input file (vector file, category file, dataset, fixture).
class LoadError : public Error {
public:
    explicit LoadError(const std::string& message) : Error("load_error", message) {}
};

class InvalidInput : public Error {
public:
    explicit InvalidInput(const std::string& message) : Error("invalid_input", message) {}
};

class TokenizeError : public Error {
public:
    explicit TokenizeError(const std::string& message) : Error("tokenize_error", message) {}
};

// An utterance with no in-vocabulary tokens reached a similarity routine.
class EmptyUtterance : public Error {
public:
    explicit EmptyUtterance(const std::string& message) : Error("empty_utterance", message) {}
};

// Mean word vector of an utterance is zero; cosine is undefined.
class DegenerateMean : public Error {
public:
    explicit DegenerateMean(const std::string& message) : Error("degenerate_mean", message) {}
};

class TemplateError : public Error {
public:
    explicit TemplateError(const std::string& message) : Error("template_error", message) {}
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& message) : Error("config_error", message) {}
};

class ProviderError : public Error {
public:
    ProviderError(int status, const std::string& message)
        : Error("provider_error", message), status_(status) {}

    // HTTP status, or 0 when the request never produced a response.
    int status() const noexcept { return status_; }

private:
    int status_;
};

class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& message) : Error("validation_error", message) {}
};

class NotFound : public Error {
public:
    explicit NotFound(const std::string& message) : Error("not_found", message) {}
};

class SessionClosed : public Error {
public:
    explicit SessionClosed(const std::string& message) : Error("session_closed", message) {}
};

}  // namespace tourdesk
