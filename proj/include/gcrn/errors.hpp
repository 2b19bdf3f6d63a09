#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gcrn {

/// Base class for all library errors.
struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Incompatible shapes passed to an operation.
struct DimensionError : Error {
    using Error::Error;
};

/// Invalid argument value (out-of-range index, non-finite input, bad enum).
struct ValueError : Error {
    using Error::Error;
};

/// Malformed file content. Carries the 1-based line number of the offence.
struct ParseError : Error {
    std::size_t line;
    ParseError(const std::string& what, std::size_t line_no)
        : Error(what + " (line " + std::to_string(line_no) + ")"), line(line_no) {}
};

/// Iterative method failed to converge. Carries the last iterate.
struct ConvergenceError : Error {
    double last_estimate;
    ConvergenceError(const std::string& what, double last)
        : Error(what), last_estimate(last) {}
};

/// Non-finite value produced during training. Carries the step index.
struct NumericError : Error {
    std::size_t step;
    NumericError(const std::string& what, std::size_t step_idx)
        : Error(what + " (step " + std::to_string(step_idx) + ")"), step(step_idx) {}
};

}  // namespace gcrn
