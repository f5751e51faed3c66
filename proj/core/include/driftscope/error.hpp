#pragma once

#include <stdexcept>
#include <string>

namespace driftscope {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Filesystem and stream failures.
class IoError : public Error {
 public:
  using Error::Error;
};

// Unparseable or structurally invalid file content (bad magic, bad header,
// malformed CSV row).
class FormatError : public Error {
 public:
  using Error::Error;
};

// Stored data no longer matches its recorded checksum.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration value or missing configuration key.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Caller violated an operation precondition (duplicate snapshot date,
// ineligible term, zero vector, length mismatch).
class InvalidInput : public Error {
 public:
  using Error::Error;
};

// Training produced non-finite values.
class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace driftscope
