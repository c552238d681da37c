// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace lowlight {

/// Tensor or image extents are incompatible with the requested operation.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A configuration value lies outside its documented domain.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An index (timestep, level, ...) is out of range.
class RangeError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Non-finite values reached an operation that requires finite input.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File-level failures: missing files, malformed headers, bad sidecars.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A raw frame has no readable metadata sidecar.
class MissingMetadataError : public IoError {
 public:
  using IoError::IoError;
};

/// Base of every checkpoint loading failure.
class CheckpointError : public IoError {
 public:
  using IoError::IoError;
};

class BadMagicError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

class VersionMismatchError : public CheckpointError {
 public:
  VersionMismatchError(unsigned found, unsigned expected)
      : CheckpointError("checkpoint format version " + std::to_string(found) + " is not supported (expected version " +
                        std::to_string(expected) + ")"),
        found_(found),
        expected_(expected) {}
  unsigned found() const { return found_; }
  unsigned expected() const { return expected_; }

 private:
  unsigned found_;
  unsigned expected_;
};

class ChecksumError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

class TruncatedFileError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

/// Tensor names/shapes do not match the model, or two checkpoints were not
/// trained together.
class IncompatibleCheckpointError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

}  // namespace lowlight
