#pragma once

#include <stdexcept>
#include <string>

namespace wattmine {

/// Misconfiguration or bad usage: wrong flags, invalid thresholds, unknown
/// devices or rules. CLI exit code 1.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed or inconsistent input data. CLI exit code 2.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

class ParameterError : public ConfigError {
public:
    explicit ParameterError(const std::string& what) : ConfigError(what) {}
};

/// Invalid topic filter (wildcard placement).
class FilterError : public ConfigError {
public:
    explicit FilterError(const std::string& what) : ConfigError(what) {}
};

/// Command or telemetry addressed to an unregistered device.
class RegistryError : public ConfigError {
public:
    explicit RegistryError(const std::string& what) : ConfigError(what) {}
};

/// Unparseable header or stream-level structural problem.
class FormatError : public DataError {
public:
    explicit FormatError(const std::string& what) : DataError(what) {}
};

/// Inputs that share no overlapping time range.
class AlignmentError : public DataError {
public:
    explicit AlignmentError(const std::string& what) : DataError(what) {}
};

/// Event timestamps outside the context stream's coverage.
class CoverageError : public DataError {
public:
    explicit CoverageError(const std::string& what) : DataError(what) {}
};

/// Context value outside the configured bucket coverage.
class BucketingError : public DataError {
public:
    explicit BucketingError(const std::string& what) : DataError(what) {}
};

/// Operation on an object in the wrong lifecycle state (publish on a stopped
/// bus, dispatch of a resolved recommendation). CLI exit code 3.
class LifecycleError : public std::logic_error {
public:
    explicit LifecycleError(const std::string& what) : std::logic_error(what) {}
};

}  // namespace wattmine
