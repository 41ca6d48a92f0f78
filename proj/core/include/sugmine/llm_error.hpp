#pragma once

#include <stdexcept>
#include <string>

namespace sugmine::llm {

/// Base class for failures talking to the model service.
class GatewayError : public std::runtime_error {
public:
    GatewayError(const std::string& what, int attempts = 1) : std::runtime_error(what), attempts_(attempts) {}
    int attempts() const noexcept { return attempts_; }

private:
    int attempts_;
};

/// Connection failures, and exhausted retries on 5xx / 429.
class TransportError : public GatewayError {
public:
    using GatewayError::GatewayError;
};

class TimeoutError : public GatewayError {
public:
    using GatewayError::GatewayError;
};

/// Non-retryable HTTP status (4xx other than 429).
class HttpStatusError : public GatewayError {
public:
    HttpStatusError(const std::string& what, int status, int attempts)
        : GatewayError(what, attempts), status_(status) {}
    int status() const noexcept { return status_; }

private:
    int status_;
};

/// The service answered, but the answer could not be understood.
class ProtocolError : public GatewayError {
public:
    ProtocolError(const std::string& what, std::string raw = {}, int attempts = 1)
        : GatewayError(what, attempts), raw_(std::move(raw)) {}
    const std::string& raw_content() const noexcept { return raw_; }

private:
    std::string raw_;
};

/// Raised by the mock backend when no fixture matches and no default is
/// configured. Deliberately not a GatewayError: pipelines must not swallow it.
class MockMiss : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

}  // namespace sugmine::llm
