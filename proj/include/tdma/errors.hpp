// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace tdma {

// Invalid or inconsistent user-supplied configuration.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// The requested rate target cannot be met (e.g. a finite mode set caps the
// achievable average rate below the target).
struct InfeasibleError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// An iterative solver exhausted its iteration budget; the message carries
// bracketing diagnostics.
struct ConvergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A root bracket could not be established, signalling a precondition
// violation or a numeric overflow regime.
struct BracketError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace tdma
