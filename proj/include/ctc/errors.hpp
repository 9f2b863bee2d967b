#pragma once

#include <stdexcept>
#include <string>

namespace ctc {

/// Integration produced a non-finite state, or an iterative solver broke down.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what, double time = 0.0)
        : std::runtime_error(what), time_(time) {}

    /// Simulation time at which the failure was detected (0 when not applicable).
    double time() const { return time_; }

private:
    double time_;
};

/// File could not be opened, read, or written.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Run configuration failed validation.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace ctc
