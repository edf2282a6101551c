#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace afc {

/// Base class for all afc failures.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Invalid grid, body placement, or run parameters.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Probe/sensor layout problem (probe outside domain or inside the body).
class LayoutError : public Error {
public:
    using Error::Error;
};

/// Action magnitude outside the configured bound.
class ActionRangeError : public Error {
public:
    using Error::Error;
};

/// Environment driven out of order (step after done, step before reset).
class LifecycleError : public Error {
public:
    using Error::Error;
};

/// Pressure solve failed to reach tolerance. Carries the tail of the
/// residual history for diagnostics.
class PoissonError : public Error {
public:
    PoissonError(const std::string& msg, std::vector<double> residual_tail)
        : Error(msg), residual_tail_(std::move(residual_tail)) {}
    const std::vector<double>& residual_tail() const { return residual_tail_; }

private:
    std::vector<double> residual_tail_;
};

/// NaN/Inf detected in solver state; identifies the first offending step.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& msg, long step)
        : Error(msg), step_(step) {}
    long step() const { return step_; }

private:
    long step_;
};

/// Malformed or truncated wire frame. Carries the byte offset at which
/// decoding failed.
class FramingError : public Error {
public:
    FramingError(const std::string& msg, size_t offset)
        : Error(msg), offset_(offset) {}
    size_t offset() const { return offset_; }

private:
    size_t offset_;
};

/// Wire protocol violation: unknown message type or out-of-order exchange.
class ProtocolError : public Error {
public:
    using Error::Error;
};

/// Bad input to an analysis or statistics routine.
class InputError : public Error {
public:
    using Error::Error;
};

/// Unreadable/incompatible file (checkpoint, snapshot, config).
class IoError : public Error {
public:
    using Error::Error;
};

} // namespace afc
