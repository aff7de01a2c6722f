#ifndef CHECKMATE_ERROR_HPP
#define CHECKMATE_ERROR_HPP

#include <stdexcept>
#include <string>

namespace checkmate {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Tensor shape or rank disagreement.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Ill-formed input data (bad record, bad label, bad manifest, ...).
class ParseError : public Error {
 public:
  using Error::Error;
};

// Inconsistent or unsupported configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A value outside its documented domain (labels, ratios, priors, ...).
class ValueError : public Error {
 public:
  using Error::Error;
};

// Non-finite value produced during computation, or a degenerate
// numerical situation (all-masked softmax row, NaN loss).
class NumericalError : public Error {
 public:
  using Error::Error;
};

// File system failures and corrupt on-disk artifacts.
class IoError : public Error {
 public:
  using Error::Error;
};

// A dependency tree whose arcs cross, which the transition system cannot
// reproduce.
class ProjectivityError : public Error {
 public:
  using Error::Error;
};

}  // namespace checkmate

#endif  // CHECKMATE_ERROR_HPP
