#pragma once

#include <stdexcept>
#include <string>

namespace ogl {

// Configuration that cannot be acted on (bad JSON, unknown keys, out-of-range
// parameters supplied through a config file or CLI).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Problem with an input dataset (unreadable file, malformed CSV, values that
// cannot be used as samples).
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Numerical failure inside an algorithm (loss of rank where rank is required,
// a solver that cannot make progress, a residual that grows when it must not).
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace ogl
