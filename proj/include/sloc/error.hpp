#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sloc {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operand shapes disagree (vector length, matrix size, path dimension).
class DimensionError : public Error {
public:
    using Error::Error;
};

/// An argument is outside the operation's domain (negative time, non-SPD matrix, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// The operation is not defined for the given kind of target.
class UnsupportedError : public Error {
public:
    using Error::Error;
};

/// An integrator produced a NaN or infinity.
class NonFiniteError : public Error {
public:
    NonFiniteError(const std::string& what, std::size_t step)
        : Error(what + " (step " + std::to_string(step) + ")"), step_(step) {}
    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

/// A Monte Carlo estimate is unreliable: effective sample size or variance floor violated.
class EstimatorError : public Error {
public:
    EstimatorError(const std::string& what, double diagnostic)
        : Error(what), diagnostic_(diagnostic) {}
    /// ESS, relative stderr, ... depending on the raising operation.
    double diagnostic() const noexcept { return diagnostic_; }

private:
    double diagnostic_;
};

/// Rejection sampling ran out of tries.
class SamplerError : public Error {
public:
    SamplerError(const std::string& what, double acceptance_rate)
        : Error(what + " (estimated acceptance rate " + std::to_string(acceptance_rate) + ")"),
          acceptance_rate_(acceptance_rate) {}
    double acceptance_rate() const noexcept { return acceptance_rate_; }

private:
    double acceptance_rate_;
};

}  // namespace sloc
