#pragma once

#include <stdexcept>
#include <string>

namespace subdiff {

/// Invalid object, scenario or argument supplied by the caller.
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A numerical routine could not meet its tolerance, or produced an
/// inconsistent result (e.g. negative residual probability).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Experiment configuration problems. `path` names the offending key
/// (e.g. "scenario.gamma") and is empty for syntax errors.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string path, const std::string& message)
        : std::runtime_error(path.empty() ? message : path + ": " + message), path_(std::move(path)) {}

    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

}  // namespace subdiff
