#pragma once

#include <stdexcept>
#include <string>

namespace dmc {

/// Numerical failure inside the ODE integrator or an episode rollout.
class SimulationError : public std::runtime_error {
public:
    enum class Kind { StepLimitExceeded, NonFiniteState };

    SimulationError(Kind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

/// Invalid or inconsistent configuration (config files, schedules, specs).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Array shapes that do not chain (features vs. network input, gradient vs. parameters).
class DimensionMismatch : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class NonFiniteGradient : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IncompleteTrajectory : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class BreakpointMismatch : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A file the command needs (checkpoint, schedule, reference) does not exist.
class MissingArtifact : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace dmc
