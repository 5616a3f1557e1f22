// Exception types shared across the library.
#pragma once

#include <stdexcept>
#include <string>

namespace ladderwalk {

// Environment window too small to evaluate a pattern or transition.
struct MarginError : std::runtime_error {
    explicit MarginError(const std::string& msg) : std::runtime_error("margin error: " + msg) {}
};

// A sampler exceeded its configured horizon (signals a bug for recurrent patterns).
struct HorizonError : std::runtime_error {
    explicit HorizonError(const std::string& msg) : std::runtime_error("horizon error: " + msg) {}
};

// A rejection sampler exhausted its attempt budget.
struct BudgetError : std::runtime_error {
    explicit BudgetError(const std::string& msg) : std::runtime_error("budget error: " + msg) {}
};

// A walk left the sampled x-range and the environment cannot be extended.
struct WindowExitError : std::runtime_error {
    explicit WindowExitError(const std::string& msg) : std::runtime_error("window exit: " + msg) {}
};

// The seven case-(2) candidate probabilities fall outside [0,1] at these (lambda, L).
struct InvalidCouplingParameters : std::runtime_error {
    explicit InvalidCouplingParameters(const std::string& msg)
        : std::runtime_error("invalid coupling parameters: " + msg) {}
};

// Coupled-chain state violates its invariant (implementation bug, not a data condition).
struct InconsistentStateError : std::logic_error {
    explicit InconsistentStateError(const std::string& msg)
        : std::logic_error("inconsistent coupling state: " + msg) {}
};

}  // namespace ladderwalk
