#pragma once

#include <stdexcept>
#include <string>

namespace hmmconf {

// Base class for all recoverable errors raised by this library. CLI maps
// these to exit code 2; anything else is treated as an internal failure.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

// A stochastic-matrix row deviates from sum 1 beyond tolerance.
class RowSumError : public Error {
 public:
  using Error::Error;
};

class NegativeEntryError : public Error {
 public:
  using Error::Error;
};

class IndexOutOfRange : public Error {
 public:
  using Error::Error;
};

// Filter normalizer hit zero: the observation is impossible under the
// supplied parameters. Callers decide how to treat the affected candidate.
class DegenerateLikelihood : public Error {
 public:
  using Error::Error;
};

class PathExplosion : public Error {
 public:
  using Error::Error;
};

class TooShort : public Error {
 public:
  using Error::Error;
};

class LengthMismatch : public Error {
 public:
  using Error::Error;
};

class CandidateExplosion : public Error {
 public:
  using Error::Error;
};

class FileNotFound : public Error {
 public:
  using Error::Error;
};

class EmptySeries : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(long row, const std::string& what)
      : Error("row " + std::to_string(row) + ": " + what), row_(row) {}

  long row() const { return row_; }

 private:
  long row_;
};

}  // namespace hmmconf
