#pragma once

#include <stdexcept>
#include <string>

namespace ghgmm {

// Argument outside the mathematical domain of a function.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// A covariance or normal-equation matrix could not be factorized.
class ConditioningError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Model or data shape that cannot be estimated (q > T, n < K, ...).
class IdentifiabilityError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Malformed input: shapes, ranges, file contents.
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Every start of a fit (or every cell of a sweep) failed.
class FitError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A file could not be read, written or renamed.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace ghgmm
