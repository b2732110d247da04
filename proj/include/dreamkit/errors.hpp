#pragma once

#include <stdexcept>
#include <string>

namespace dreamkit {

// Bad inputs, malformed files, violated preconditions. CLI exit code 2.
struct ValidationError : std::runtime_error {
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Mismatched artifacts (wrong C/N/m, grid hash, vector length). CLI exit code 3.
struct IncompatibilityError : std::runtime_error {
    explicit IncompatibilityError(const std::string& msg) : std::runtime_error(msg) {}
};

// NaN/Inf reached a value that must stay finite.
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace dreamkit
