#pragma once

/// @file errors.hpp
/// @brief Exception types that map onto the command-line exit codes.

#include <stdexcept>
#include <string>

namespace viscomem {

/// Invalid configuration or violated precondition (exit code 2).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Non-finite values or blow-up during time stepping (exit code 3).
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace viscomem
