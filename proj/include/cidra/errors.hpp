// Error taxonomy shared across the library.  The CLI maps these onto exit
// codes, so every failure raised out of the core should be one of the three
// categories below (or std::bad_alloc etc. for truly exceptional states).
#pragma once

#include <stdexcept>
#include <string>

namespace cidra {

// Bad or inconsistent user input: parameter files, configs, CSV schemas.
struct validation_error : std::runtime_error {
    explicit validation_error(const std::string& msg) : std::runtime_error(msg) {}
};

// An algorithm failed to converge or produced values outside its contract
// (residue extrapolation diverged, eigenvalue bracketing failed, SVD order
// deficient, ...).
struct numeric_error : std::runtime_error {
    explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};

// A simulation query left the convex hull of the realised setpoint grid.
struct hull_error : std::runtime_error {
    explicit hull_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace cidra
