#pragma once

#include <stdexcept>
#include <string>

namespace anerf {

// Bad shapes, invalid option values, malformed config files.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Unreadable/corrupt inputs: checkpoints, transforms.json, scene files, images.
struct ParseError : std::runtime_error {
    explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

// Failures inside a running pipeline (non-finite gradients, NaN loss, ...).
struct RuntimeFailure : std::runtime_error {
    explicit RuntimeFailure(const std::string& msg) : std::runtime_error(msg) {}
};

// API misuse, e.g. backpropagating through a truncated trace.
struct UnsupportedOperation : std::logic_error {
    explicit UnsupportedOperation(const std::string& msg) : std::logic_error(msg) {}
};

}  // namespace anerf
