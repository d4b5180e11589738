#pragma once

#include <stdexcept>
#include <string>

namespace ctca {

// Error taxonomy. Training-surface errors (infeasible targets, protocol
// violations) are distinct types so callers can tell data bugs from
// numeric or I/O failures.

struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct CheckpointError : std::runtime_error {
    explicit CheckpointError(const std::string& msg) : std::runtime_error(msg) {}
};

struct InfeasibleTargetError : std::runtime_error {
    explicit InfeasibleTargetError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ProtocolError : std::runtime_error {
    explicit ProtocolError(const std::string& msg) : std::runtime_error(msg) {}
};

struct RegistryError : std::runtime_error {
    explicit RegistryError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace ctca
