#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace refctl {

/// Base of every library exception.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or out-of-contract input (bad config value, grid without 0, ...).
class InputError : public Error {
public:
    using Error::Error;
};

/// A numerical routine failed to reach its tolerance.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// The model falls outside the structure the solver handles (kappa < eta(0),
/// indeterminate case classification, ...).
class ModelError : public Error {
public:
    using Error::Error;
};

/// The truncated working domain is too small for the requested computation.
class DomainTooSmall : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// A simulated path produced a non-finite state.
class PathError : public NumericalError {
public:
    PathError(const std::string& what, std::size_t step)
        : NumericalError(what), step_(step) {}
    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

}  // namespace refctl
