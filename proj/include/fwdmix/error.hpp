#pragma once

#include <stdexcept>
#include <string>

namespace fwdmix {

// Base for every error raised by the library. The CLI maps these to exit 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept { return "error"; }
};

// Non-positive time or parameter, p outside [0,1], and similar.
class DomainError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "domain_error"; }
};

// Operation not defined for the requested family (e.g. lognormal scores).
class UnsupportedFamily : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "unsupported_family"; }
};

// An observation has zero density under the model, so the log-likelihood is -inf.
class DegenerateLikelihood : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "degenerate_likelihood"; }
};

class ConvergenceError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "convergence_error"; }
};

class QuadratureError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "quadrature_error"; }
};

class SampleTooSmall : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "sample_too_small"; }
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, int line)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  int line() const noexcept { return line_; }
  const char* kind() const noexcept override { return "parse_error"; }

 private:
  int line_;
};

}  // namespace fwdmix
