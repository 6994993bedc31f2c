#pragma once

#include <stdexcept>
#include <string>

namespace qled {

// Malformed or inconsistent configuration input. The CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// File or wire-format problem. The CLI maps this to exit code 3.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Analysis with no defined answer: degenerate fit input, empty curve, unphysical
// state. The CLI maps this to exit code 4.
struct AnalysisError : std::runtime_error {
    explicit AnalysisError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace qled
