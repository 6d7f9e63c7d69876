#pragma once

#include <stdexcept>
#include <string>

namespace geophase {

// Malformed configuration, CLI usage, or input files. CLI exit code 2.
struct config_error : std::runtime_error {
    explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

// A numerical procedure failed its own validation (non-convergence, residual
// above tolerance, degeneracy guard, step-size bound, divergence). CLI exit
// code 3. Precondition violations on module operations also use this type.
struct numerical_error : std::runtime_error {
    explicit numerical_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace geophase
