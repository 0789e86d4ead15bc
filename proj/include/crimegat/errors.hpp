#pragma once

#include <stdexcept>
#include <string>

namespace crimegat {

// Base class for everything thrown by the library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad usage or configuration (CLI exit code 1).
struct ConfigError : Error {
  using Error::Error;
};

// Unreadable or malformed data, including schema mismatches (CLI exit code 2).
struct DataError : Error {
  using Error::Error;
};

// Violated shape or call-contract preconditions between components
// (CLI exit code 2).
struct ContractError : Error {
  using Error::Error;
};

// Non-finite values or diverging optimization (CLI exit code 3).
struct NumericError : Error {
  using Error::Error;
};

}  // namespace crimegat
