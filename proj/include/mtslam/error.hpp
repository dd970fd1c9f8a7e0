#pragma once

#include <stdexcept>
#include <string>

namespace mtslam {

// Base for everything this library throws on purpose.
struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Shape/dimension disagreements between tensors.
struct DimError : Error {
  using Error::Error;
};

// Violated operation contract (non-scalar loss, bad index, ...).
struct ContractError : Error {
  using Error::Error;
};

// Malformed corpus / label / checkpoint / config input.
struct ParseError : Error {
  using Error::Error;
};

// Inconsistent configuration values.
struct ConfigError : Error {
  using Error::Error;
};

// Bad or insufficient data handed to an operation.
struct InputError : Error {
  using Error::Error;
};

// Math applied outside its domain (log of a non-positive value, ...).
struct DomainError : Error {
  using Error::Error;
};

// Filesystem and stream failures.
struct IoError : Error {
  using Error::Error;
};

}  // namespace mtslam
