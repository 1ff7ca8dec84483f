#pragma once

#include <stdexcept>
#include <string>

namespace covw {

// Error taxonomy shared by every module. The CLI maps ArgumentError and
// DomainError to exit code 2.

struct ArgumentError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

// Inputs are individually valid but jointly carry no information
// (constant vectors, zero variance, every test infeasible).
struct DegenerateInputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct BracketError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SingularDerivativeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NonConvergenceError : std::runtime_error {
    NonConvergenceError(const std::string& what, double last)
        : std::runtime_error(what), last_iterate(last) {}
    double last_iterate;
};

} // namespace covw
