#pragma once

#include <stdexcept>
#include <string>

namespace knm {

/// Root of every error thrown by the library. The three direct subclasses map
/// onto the CLI exit codes (config = 2, backend = 3, data = 4).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class BackendError : public Error {
 public:
  using Error::Error;
};

/// The remote model could not be reached, timed out, or answered garbage.
/// Callers must not paper over this with a uniform distribution.
class BackendUnavailable : public BackendError {
 public:
  using BackendError::BackendError;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class EmptyCorpus : public DataError {
 public:
  EmptyCorpus() : DataError("empty corpus: no tokens found") {}
  explicit EmptyCorpus(const std::string& what) : DataError(what) {}
};

class DimensionMismatch : public DataError {
 public:
  using DataError::DataError;
};

class VocabMismatch : public DataError {
 public:
  using DataError::DataError;
};

class LengthMismatch : public DataError {
 public:
  using DataError::DataError;
};

class EmptyInput : public DataError {
 public:
  using DataError::DataError;
};

class IoError : public DataError {
 public:
  using DataError::DataError;
};

class FormatError : public DataError {
 public:
  using DataError::DataError;
};

class ChecksumError : public DataError {
 public:
  using DataError::DataError;
};

}  // namespace knm
