#pragma once

#include <stdexcept>
#include <string>

namespace rkl {

// Bad user input: malformed config, unknown key, invalid CLI usage.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Numerical failure at runtime: rank deficiency, divergence, loss of
// positive definiteness. Carries enough context to diagnose the stage.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// File I/O and format problems (datasets, checkpoints, reports).
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace rkl
