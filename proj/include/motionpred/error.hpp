#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace motionpred {

/// Coarse failure category; the CLI maps each one onto an exit status.
enum class ErrorKind : std::uint8_t {
    config,     ///< bad parameters, bad preconditions, unresolvable config
    numerical,  ///< non-finite values appeared during an online update
    io,         ///< unreadable, malformed or truncated files
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(ErrorKind::config, what) {}
};

/// Raised by subsample2 / build_pyramid when a level would have a dimension below 1.
class PyramidTooDeep : public ConfigError {
public:
    using ConfigError::ConfigError;
};

/// Zero-variance input where a normalization or correlation needs spread.
class DegenerateSignal : public ConfigError {
public:
    using ConfigError::ConfigError;
};

/// Non-finite weight, state or sensitivity entry. Carries the 1-based step index.
class NumericalFailure : public Error {
public:
    NumericalFailure(long step, const std::string& what)
        : Error(ErrorKind::numerical, what + " (step " + std::to_string(step) + ")"), step_(step) {}
    long step() const noexcept { return step_; }

private:
    long step_;
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(ErrorKind::io, what) {}
};

enum class FormatFault : std::uint8_t { malformed_header, truncated_payload, dimension_mismatch };

class VolumeFormatError : public IoError {
public:
    VolumeFormatError(FormatFault fault, const std::string& what)
        : IoError(prefix(fault) + what), fault_(fault) {}
    FormatFault fault() const noexcept { return fault_; }

private:
    static std::string prefix(FormatFault f) {
        switch (f) {
            case FormatFault::malformed_header: return "malformed header: ";
            case FormatFault::truncated_payload: return "truncated payload: ";
            case FormatFault::dimension_mismatch: return "dimension mismatch: ";
        }
        return {};
    }
    FormatFault fault_;
};

inline void require(bool cond, const std::string& what) {
    if (!cond) throw ConfigError(what);
}

}  // namespace motionpred
