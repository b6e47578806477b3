#ifndef PAD_ERROR_HPP_
#define PAD_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace pad {

// Base class for all errors raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration or usage. CLI maps this to exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A call violated an API precondition (shape mismatch, empty input, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

// Raw data could not be decoded or read.
class IngestionError : public Error {
 public:
  using Error::Error;
};

// No face detected in a frame.
class NoFaceError : public Error {
 public:
  using Error::Error;
};

// An evaluation protocol produced a degenerate setup (e.g. empty split).
class ProtocolError : public Error {
 public:
  using Error::Error;
};

// A metric is undefined on the given scores (e.g. APCER without attacks).
class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

}  // namespace pad

#endif  // PAD_ERROR_HPP_
