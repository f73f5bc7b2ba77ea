#pragma once

#include <stdexcept>
#include <string>

namespace lbcnn {

/// Bad input: malformed files, invalid arguments, contract violations.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A numerical procedure failed (non-convergence, singular data).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace lbcnn
