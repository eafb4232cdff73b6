#pragma once

#include <stdexcept>
#include <string>

namespace archfit {

/// Invalid user input: parameter constraints, shapes, unsupported requests.
class DomainError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A matrix required to be invertible is numerically singular
/// (condition number above 1e12 or a nonpositive eigenvalue).
class SingularError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Weighted estimation hit weights too extreme to trust.
class DegenerateWeights : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace archfit
