#pragma once

#include <stdexcept>
#include <string>

namespace rcflow {

/// Shape or arity mismatch between operands.
class StructuralError : public std::invalid_argument {
public:
  explicit StructuralError(const std::string& what) : std::invalid_argument(what) {}
};

/// Non-finite values, or a numeric precondition that does not hold.
class NumericError : public std::runtime_error {
public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

/// Parameter outside its declared domain (t outside [0,1], T = 0, ...).
class DomainError : public std::domain_error {
public:
  explicit DomainError(const std::string& what) : std::domain_error(what) {}
};

} // namespace rcflow
