#pragma once

#include <stdexcept>

namespace affine {

// Numerical trouble (solver stall, non-finite states, undefined statistics).
// Distinct from DivergentError, which reports genuine model behavior.
class NumericError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace affine
