#pragma once

#include <stdexcept>
#include <string>

namespace clade {

// Base of every error the library raises. Callers that only care about
// success/failure catch this; tests match the concrete kinds.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor, volume or patch dimensions disagree with an operation contract.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf reached a checked point in the pipeline.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Malformed file, header or JSON document.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Precondition on arguments violated (bad stride, empty corpus, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

}  // namespace clade
