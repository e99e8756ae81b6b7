#pragma once

#include <stdexcept>
#include <string>

namespace mcsp {

// Bad data handed to an operation (shape mismatch, non-finite values, ...).
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad configuration (unknown key, out-of-range value, inconsistent lengths).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Filesystem / serialization problems.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Machine-parseable category tag for CLI error lines.
inline const char* error_category(const std::exception& e) {
    if (dynamic_cast<const ValidationError*>(&e)) return "validation";
    if (dynamic_cast<const ConfigError*>(&e)) return "config";
    if (dynamic_cast<const IoError*>(&e)) return "io";
    return "internal";
}

} // namespace mcsp
