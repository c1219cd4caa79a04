#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace imda {

// Base of every error raised by the library. The C API maps the subclasses
// onto status codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

// A non-finite entry was found; `index` is the flat coordinate.
class NonFiniteError : public NumericError {
 public:
  NonFiniteError(const std::string& what, std::size_t index)
      : NumericError(what), index_(index) {}
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

// An iterative method hit its cap. `last_iterate` is the best point seen.
class ConvergenceError : public NumericError {
 public:
  ConvergenceError(const std::string& what, std::vector<double> last_iterate)
      : NumericError(what), last_iterate_(std::move(last_iterate)) {}
  const std::vector<double>& last_iterate() const { return last_iterate_; }

 private:
  std::vector<double> last_iterate_;
};

}  // namespace imda
