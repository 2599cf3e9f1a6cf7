#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sneurod {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor or layer extents disagree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// An argument is outside its valid domain (rate, gamma, fan, class index...).
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// A model configuration cannot produce a valid layer chain.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Input data is malformed, missing or inconsistent.
class DataError : public Error {
 public:
  using Error::Error;
};

/// A NaN/Inf showed up where a finite value is required.
class NumericError : public Error {
 public:
  using Error::Error;
};

class ImageError : public DataError {
 public:
  enum class Kind { kUnsupportedFormat, kBadMaxval, kTruncated, kIo };

  ImageError(Kind kind, const std::string& what) : DataError(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

/// Manifest problem tied to a data row (0-based, header excluded).
class ManifestError : public DataError {
 public:
  ManifestError(std::size_t row, const std::string& what)
      : DataError("manifest row " + std::to_string(row) + ": " + what), row_(row) {}
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

class CheckpointError : public DataError {
 public:
  enum class Kind { kIo, kBadMagic, kVersionMismatch, kTruncated, kSizeMismatch, kBadHeader };

  CheckpointError(Kind kind, const std::string& what) : DataError(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

}  // namespace sneurod
