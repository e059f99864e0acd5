#pragma once

#include <stdexcept>
#include <string>

namespace mcigle {

// Bad user-supplied values: malformed files, unknown keys, invalid ranges.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Structurally invalid inputs to an operation (dimension mismatches, NaNs).
struct InputError : std::runtime_error {
    explicit InputError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical failure inside a solver (singular systems, degenerate updates).
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Violation of the incremental protocol (mismatched stream states, reuse of
// consumed phase data).
struct ProtocolError : std::runtime_error {
    explicit ProtocolError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace mcigle
