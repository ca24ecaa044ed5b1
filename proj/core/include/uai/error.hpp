#ifndef UAI_ERROR_HPP_
#define UAI_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace uai {

// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration (dimensions, probabilities, counts).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Caller-supplied data violates an operation's preconditions.
class InputError : public Error {
 public:
  using Error::Error;
};

// File or stream could not be read or written, or is malformed.
class IoError : public Error {
 public:
  using Error::Error;
};

// Numerical failure: non-finite values, singular matrices.
class NumericError : public Error {
 public:
  using Error::Error;
};

// An API was used out of order (e.g. backward with a foreign cache).
class ContractError : public Error {
 public:
  using Error::Error;
};

}  // namespace uai

#endif  // UAI_ERROR_HPP_
