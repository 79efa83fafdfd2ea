#pragma once

#include <stdexcept>
#include <string>

namespace codl {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Incompatible tensor shapes; message names both shapes.
struct DimensionError : Error {
    using Error::Error;
};

// Violated operation contract (e.g. backward on a non-scalar).
struct ContractError : Error {
    using Error::Error;
};

// Non-finite state or gradient; message carries the step/iteration index.
struct DivergenceError : Error {
    using Error::Error;
};

// Adaptive step size underflow.
struct StiffnessError : Error {
    using Error::Error;
};

// Malformed file; message carries line number or byte offset.
struct ParseError : Error {
    using Error::Error;
};

// Bad configuration value or unknown config key.
struct ConfigError : Error {
    using Error::Error;
};

// Admissibility stage hit its hard iteration cap; message carries best-seen loss.
struct NonConvergenceError : Error {
    NonConvergenceError(const std::string& msg, double best_loss)
        : Error(msg), best_loss_I(best_loss) {}
    double best_loss_I;
};

} // namespace codl
