#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace qprop {

/// Fixed-point iteration ran out of budget. Carries the last iterate so
/// callers can inspect how far the solve got.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(std::string what, double last_iterate, int iterations)
        : std::runtime_error(std::move(what)),
          last_iterate(last_iterate),
          iterations(iterations) {}

    double last_iterate;
    int iterations;
};

/// A requested allocation would exceed the simulator's memory budget.
class ResourceError : public std::runtime_error {
public:
    ResourceError(std::string what, std::size_t required_bytes)
        : std::runtime_error(std::move(what)), required_bytes(required_bytes) {}

    std::size_t required_bytes;
};

/// Regression/estimation could not be carried out (degenerate window,
/// too few usable layers, singular design matrix).
class EstimationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace qprop
