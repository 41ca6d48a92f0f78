#pragma once

#include <stdexcept>
#include <string>

namespace sugmine {

/// Invalid configuration or precondition violated by the caller.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Malformed or inconsistent input data (datasets, model files, fixtures).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace sugmine
