#pragma once

#include <stdexcept>
#include <string>

namespace orient {

// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input, bad configuration, unreadable or inconsistent files.
class InputError : public Error {
 public:
  using Error::Error;
};

// Non-finite values or divergence during a numeric computation.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace orient
