#ifndef PNPF_ERRORS_HPP
#define PNPF_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace pnpf {

/// Base class for all errors thrown by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A point has non-positive depth in the camera frame.
struct CheiralityViolation : Error {
    using Error::Error;
};

/// Scalar argument outside the mathematical domain of an operation.
struct DomainError : Error {
    using Error::Error;
};

/// 3D point configuration too degenerate to solve (e.g. all points coincide).
struct DegenerateGeometry : Error {
    using Error::Error;
};

/// Every pose candidate violates cheirality for a majority of points.
struct NoValidCandidate : Error {
    using Error::Error;
};

struct NotEnoughCorrespondences : Error {
    using Error::Error;
};

/// The optimizer could not accept a step over many damping increases.
struct DivergedError : Error {
    using Error::Error;
};

/// RANSAC found no consensus set of sufficient size.
struct NoConsensus : Error {
    using Error::Error;
};

struct InvalidOptions : Error {
    using Error::Error;
};

/// Scene rejection-sampling exceeded its attempt budget.
struct SamplingExhausted : Error {
    using Error::Error;
};

/// No location-field cell hits the object.
struct EmptyField : Error {
    using Error::Error;
};

struct DegenerateGroundTruth : Error {
    using Error::Error;
};

struct EmptyInput : Error {
    using Error::Error;
};

struct UnsortedThresholds : Error {
    using Error::Error;
};

struct ConfigError : Error {
    using Error::Error;
};

struct ExperimentFailure : Error {
    using Error::Error;
};

}  // namespace pnpf

#endif
