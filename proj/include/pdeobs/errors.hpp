#pragma once

// Exception hierarchy shared by every module. The CLI maps these onto its
// exit-code contract: config_error -> 2, numerical_error (and subclasses) -> 3.

#include <stdexcept>
#include <string>

namespace pdeobs {

struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Argument outside its admissible domain (r outside [0,1], t outside [0,T], ...).
struct range_error : error {
    using error::error;
};

// Inputs built on incompatible grids or time stamps.
struct shape_error : error {
    using error::error;
};

// Malformed or unsupported configuration.
struct config_error : error {
    using error::error;
};

// A stated invariant of the problem data does not hold (e.g. D <= 0).
struct invariant_error : config_error {
    using config_error::config_error;
};

struct numerical_error : error {
    using error::error;
};

struct convergence_error : numerical_error {
    convergence_error(const std::string& what, double tail_norm, int iterations)
        : numerical_error(what), tail_norm(tail_norm), iterations(iterations) {}

    double tail_norm;
    int iterations;
};

// Grid too coarse for a required stencil.
struct resolution_error : numerical_error {
    using numerical_error::numerical_error;
};

}  // namespace pdeobs
