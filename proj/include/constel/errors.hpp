#pragma once

#include <stdexcept>
#include <string>

namespace constel {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Collinear, coincident or otherwise rank-deficient geometry.
class DegenerateError : public Error {
 public:
  using Error::Error;
};

/// RANSAC could not gather enough inliers.
class NoConsensusError : public Error {
 public:
  using Error::Error;
};

class DimensionMismatchError : public Error {
 public:
  using Error::Error;
};

/// A cloud has fewer points than the operation needs.
class InsufficientPointsError : public Error {
 public:
  using Error::Error;
};

/// Fewer than three correspondences survived to pose estimation.
class InsufficientMatchesError : public Error {
 public:
  using Error::Error;
};

/// A point cloud violates its invariants (duplicate ids, non-finite values).
class InvalidCloudError : public Error {
 public:
  using Error::Error;
};

/// Invalid parameters or configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Map persistence failures.
class MalformedFileError : public Error {
 public:
  using Error::Error;
};

class VersionMismatchError : public MalformedFileError {
 public:
  using MalformedFileError::MalformedFileError;
};

class ChecksumError : public MalformedFileError {
 public:
  using MalformedFileError::MalformedFileError;
};

}  // namespace constel
