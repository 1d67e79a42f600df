#pragma once

#include <stdexcept>
#include <string>

namespace spectralstrip {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid arguments: bad grid bounds, support outside the domain, singular A.
class ParameterError : public Error {
 public:
  using Error::Error;
};

// A field does not decay inside the grid, so no cutoff radius exists.
class DecayError : public Error {
 public:
  using Error::Error;
};

// Non-finite arithmetic or repeated pivot breakdown.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// The shooting function has no sign change over the requested bracket.
class BracketError : public Error {
 public:
  using Error::Error;
};

// An operation was handed a result it cannot consume (e.g. a blown-up F).
class InvalidStateError : public Error {
 public:
  using Error::Error;
};

// Input data violates a structural bound (e.g. F(x0) eigenvalue outside
// [-sqrt(lambda), sqrt(lambda)]).
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

// Malformed CLI flags or config files.
class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace spectralstrip
