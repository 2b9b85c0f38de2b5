#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lorenza {

// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class BatchError : public Error {
 public:
  using Error::Error;
};

class UnsupportedError : public Error {
 public:
  using Error::Error;
};

// A column of the matrix being factorized collapsed below tolerance.
class RankDeficiencyError : public Error {
 public:
  RankDeficiencyError(std::size_t column, const std::string& what)
      : Error(what), column_(column) {}
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t column_;
};

// A loss, gradient or intermediate value was NaN or infinite.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Sketch input had zero norm.
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

// Requested a normalized perturbation of a (numerically) zero direction.
class DegeneratePerturbationError : public Error {
 public:
  using Error::Error;
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};

}  // namespace lorenza
