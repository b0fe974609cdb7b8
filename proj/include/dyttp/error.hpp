#pragma once

#include <stdexcept>
#include <string>

namespace dyttp {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Incompatible tensor shapes or configuration dimensions.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of an op (log of 0, division by 0, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file: bad magic, wrong version, missing columns.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Input ended before the declared content was read.
class TruncationError : public FormatError {
 public:
  using FormatError::FormatError;
};

/// Stored checksum does not match the bytes on disk.
class CorruptionError : public FormatError {
 public:
  using FormatError::FormatError;
};

/// Checkpoint parameters do not fit the active model configuration.
class CheckpointMismatch : public Error {
 public:
  using Error::Error;
};

}  // namespace dyttp
