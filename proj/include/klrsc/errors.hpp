#pragma once

#include <stdexcept>
#include <string>

namespace klrsc {

/// File or stream problem (missing input, unwritable output, bad magic).
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Rejected configuration value or malformed config text.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Failure while running the reconstruction itself.
struct PipelineError : std::runtime_error {
    explicit PipelineError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace klrsc
