#pragma once

#include <stdexcept>
#include <string>

namespace lvorder {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvalidArgument : Error {
  using Error::Error;
};

// A variable (or residual) with zero sample variance where a division by its
// variance would be required.
struct DegenerateInput : Error {
  DegenerateInput(const std::string& what, std::string variable)
      : Error(what), variable(std::move(variable)) {}
  std::string variable;
};

struct SingularMatrix : Error {
  SingularMatrix(const std::string& what, double condition)
      : Error(what), condition(condition) {}
  double condition;
};

}  // namespace lvorder
