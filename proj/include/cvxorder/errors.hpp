#ifndef CVXORDER_ERRORS_HPP
#define CVXORDER_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace cvxorder {

// Input violates a documented precondition (bad dimensions, bad weights,
// malformed files, out-of-range parameters). CLI maps this to exit code 2.
class invalid_input : public std::invalid_argument {
 public:
  explicit invalid_input(const std::string& what) : std::invalid_argument(what) {}
};

class dimension_mismatch : public invalid_input {
 public:
  explicit dimension_mismatch(const std::string& what) : invalid_input(what) {}
};

// A discretization grid fails to cover the data it must resolve.
class grid_too_coarse : public invalid_input {
 public:
  explicit grid_too_coarse(const std::string& what) : invalid_input(what) {}
};

// A solver produced or encountered a non-finite value, or an iterative
// scheme failed in a way that cannot be expressed as a flagged result.
class numerical_error : public std::runtime_error {
 public:
  explicit numerical_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace cvxorder

#endif  // CVXORDER_ERRORS_HPP
