#ifndef BOXFORGE_ERRORS_H_
#define BOXFORGE_ERRORS_H_

#include <stdexcept>
#include <string>

namespace boxforge {

// Base class for every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An input violated a documented invariant or precondition.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// A mathematical operation was asked to leave its domain (e.g. log of 0).
class DomainError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// A document could not be parsed. The message carries the location.
class ParseError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Reading or writing a file failed.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace boxforge

#endif  // BOXFORGE_ERRORS_H_
