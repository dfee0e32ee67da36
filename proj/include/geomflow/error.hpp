#pragma once

#include <stdexcept>
#include <string>

namespace geomflow {

/// Input violates a documented precondition (bad metric, empty span, wrong flow, ...).
class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

/// The numerics could not produce a result (non-finite field at the minimum step, failed fit).
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace geomflow
