#pragma once

#include <stdexcept>
#include <string>

namespace smvp {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A configuration value or call argument is out of range.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Vector/matrix dimensions disagree.
class DimensionError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

/// Input data is malformed or violates a data invariant (bad CSV row,
/// non-monotone dates, a fully missing row, a non-PSD covariance, ...).
class DataError : public Error {
 public:
  explicit DataError(const std::string& what, long line = -1)
      : Error(line >= 0 ? what + " (line " + std::to_string(line) + ")" : what),
        line_(line) {}

  long line() const noexcept { return line_; }

 private:
  long line_;
};

/// A coordinate has zero effective curvature, so its update is undefined.
class DegenerateAssetError : public Error {
 public:
  explicit DegenerateAssetError(std::size_t asset)
      : Error("degenerate asset " + std::to_string(asset) +
              ": zero effective curvature in coordinate update"),
        asset_(asset) {}

  std::size_t asset() const noexcept { return asset_; }

 private:
  std::size_t asset_;
};

/// A file could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// A covariance block that must be positive definite is not.
class IllConditionedError : public Error {
 public:
  using Error::Error;
};

}  // namespace smvp
