#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace delaykinetic {

enum class ErrorKind {
  domain,         // argument outside the admissible range
  shape,          // mismatched dimension, delay or grid
  discontinuity,  // splice endpoints disagree
  normalization,  // weights do not form a probability vector
  config,         // invalid experiment or integrator configuration
  divergence,     // non-finite or runaway state during integration
  convergence,    // Picard iteration exhausted its budget
  io,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::domain: return "domain";
    case ErrorKind::shape: return "shape";
    case ErrorKind::discontinuity: return "discontinuity";
    case ErrorKind::normalization: return "normalization";
    case ErrorKind::config: return "config";
    case ErrorKind::divergence: return "divergence";
    case ErrorKind::convergence: return "convergence";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what) : Error(ErrorKind::domain, what) {}
};

class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& what) : Error(ErrorKind::shape, what) {}
};

class DiscontinuityError : public Error {
 public:
  explicit DiscontinuityError(const std::string& what) : Error(ErrorKind::discontinuity, what) {}
};

class NormalizationError : public Error {
 public:
  explicit NormalizationError(const std::string& what) : Error(ErrorKind::normalization, what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::config, what) {}
};

class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, long step) : Error(ErrorKind::divergence, what), step_(step) {}
  long step() const noexcept { return step_; }

 private:
  long step_;
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::io, what) {}
};

}  // namespace delaykinetic
