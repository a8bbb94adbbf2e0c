#pragma once

#include <stdexcept>
#include <string>

namespace condwalk {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Non-finite or out-of-domain argument to a kernel function.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Inconsistent run configuration (bad remainder variant, wrong method for a law, ...).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Memory or enumeration cap exceeded.
class ResourceError : public Error {
public:
    using Error::Error;
};

/// Conditioning on an event of zero (empirical or exact) mass.
class EmptyConditioningError : public Error {
public:
    using Error::Error;
};

class FitError : public Error {
public:
    using Error::Error;
};

}  // namespace condwalk
