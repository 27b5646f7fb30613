#pragma once

#include <stdexcept>
#include <string>

namespace knobtune {

/// Invalid user configuration (knob spaces, specs, scenario files).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A caller broke a precondition of an operation.
class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Covariance factorization failed even at the largest jitter.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// No unsampled knob setting is left to choose from.
class ExhaustionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The sampling phase already consumed its whole budget.
class PhaseCompleteError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ProtocolError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Transport closed or failed underneath a session.
class SessionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class OracleInfeasibleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class UndefinedQoSError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace knobtune
