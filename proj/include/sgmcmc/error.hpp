#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sgmcmc {

// Malformed arguments: dimension mismatches, non-finite entries, bad sizes.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A matrix expected to be positive semidefinite has an eigenvalue below the
// clamping tolerance.
class NotPsd : public std::domain_error {
 public:
  NotPsd(const std::string& what, double eigenvalue)
      : std::domain_error(what), eigenvalue_(eigenvalue) {}
  double eigenvalue() const { return eigenvalue_; }

 private:
  double eigenvalue_;
};

// Overflow, singular systems and similar arithmetic breakdowns.
class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed dataset or configuration file. `where` is a byte offset for
// binary formats and a 1-based line number for text formats.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::size_t where)
      : std::runtime_error(what), where_(where) {}
  std::size_t where() const { return where_; }

 private:
  std::size_t where_;
};

}  // namespace sgmcmc
