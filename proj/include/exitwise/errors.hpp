#pragma once

#include <stdexcept>
#include <string>

namespace exitwise {

// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Shape or length mismatch between tensors/layers.
struct DimensionError : Error {
    using Error::Error;
};

// Out-of-range scalar argument (fractions, probabilities, alpha, gamma, ...).
struct ParameterError : Error {
    using Error::Error;
};

// Class index or similar discrete index out of range.
struct IndexError : Error {
    using Error::Error;
};

// Architecture cannot be realized (valid-convolution geometry exhausted).
struct GeometryError : Error {
    using Error::Error;
};

// Malformed file contents (dataset records, checkpoint payloads).
struct FormatError : Error {
    using Error::Error;
};

// Filesystem-level failure; message names the offending path.
struct IoError : Error {
    using Error::Error;
};

// Operation requires state that is absent (activation cache, calibration).
struct StateError : Error {
    using Error::Error;
};

// Curve fit failed to converge; message carries diagnostics.
struct FitError : Error {
    using Error::Error;
};

// Rational fit has a pole inside the fitted accuracy range.
struct PoleError : FitError {
    using FitError::FitError;
};

// Checkpoint load failures, one type per failure mode.
struct CheckpointMagicError : FormatError {
    using FormatError::FormatError;
};
struct CheckpointVersionError : FormatError {
    using FormatError::FormatError;
};
struct CheckpointTruncatedError : FormatError {
    using FormatError::FormatError;
};

}  // namespace exitwise
