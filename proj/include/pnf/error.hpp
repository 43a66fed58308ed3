// Copyright 2026 The pnf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace pnf {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed argument: wrong shape, out-of-range value, empty collection.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// Inconsistent or unknown configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A clinical marker required by the configuration has no value.
class MissingMarker : public Error {
 public:
  using Error::Error;
};

/// Dataset manifest or referenced files failed to load or validate.
class LoadError : public Error {
 public:
  using Error::Error;
};

/// Checkpoint file is corrupt, truncated or incompatible.
class CheckpointError : public Error {
 public:
  using Error::Error;
};

/// Metric is not defined for the given input (e.g. a single class).
class UndefinedMetric : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss.
class TrainingDiverged : public Error {
 public:
  using Error::Error;
};

/// A validation subject was also present in the training set.
class SubjectLeakage : public Error {
 public:
  using Error::Error;
};

}  // namespace pnf
