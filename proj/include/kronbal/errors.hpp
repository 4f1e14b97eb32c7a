#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace kronbal {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Precondition violated by the caller (dimension mismatch, index out of range).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A Kronecker dimension n^k (or a binomial count) does not fit the index type.
class CapacityError : public Error {
 public:
  using Error::Error;
};

/// A numerical assumption failed (non-Hurwitz A, singular Gramian, ...).
class SolverError : public Error {
 public:
  using Error::Error;
};

/// Repeated Hankel singular values made a balancing system rank deficient.
class DegenerateError : public SolverError {
 public:
  using SolverError::SolverError;
};

/// Malformed input document.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Well-formed document whose contents are inconsistent.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// File could not be opened or written.
class IoError : public Error {
 public:
  using Error::Error;
};

using Warnings = std::vector<std::string>;

inline void warn(Warnings* sink, std::string message) {
  if (sink != nullptr) sink->push_back(std::move(message));
}

}  // namespace kronbal
