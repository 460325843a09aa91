#pragma once

#include <stdexcept>
#include <string>

namespace forge {

// Error taxonomy; the CLI maps these onto process exit codes.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Bad input data (malformed rows, out-of-range values, shape mismatches).
struct ValidationError : std::runtime_error {
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Training or evaluation produced non-finite / diverging values.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace forge
