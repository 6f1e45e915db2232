#pragma once

#include <stdexcept>
#include <string>

namespace gmsynth {

/// Malformed or physically meaningless input data (parse failures, NaNs, zero energy).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Violated precondition or invariant on arguments.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An iterative procedure failed to produce a usable answer.
class ConvergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace gmsynth
