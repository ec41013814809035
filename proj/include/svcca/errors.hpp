// Copyright 2026 The svcca-toolkit Authors
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <stdexcept>
#include <string>

namespace svcca {

/// Root of every error raised by the toolkit.
///
/// Errors split into two families that the CLI maps to distinct exit codes:
/// validation problems with the inputs (exit 1) and numerical failures while
/// computing (exit 2).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

class NumericalError : public Error {
public:
    using Error::Error;
};

/// Malformed tensor file header or payload.
class FormatError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// Non-finite entries or a matrix too small to carry variance.
class DataError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class ManifestError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// Request for an (epoch, layer) that the run does not hold.
class LookupError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class ShapeError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class AlignmentError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// Bad configuration or generator spec.
class ConfigError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// Zero-variance input: nothing survives truncation.
class DegenerateInputError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

}  // namespace svcca
